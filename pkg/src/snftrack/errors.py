"""Exception hierarchy shared by all modules."""


class TrackError(Exception):
    """Base class for every error raised by the package."""


# identity
class UnknownOrganization(TrackError):
    pass


class UnknownIdentity(TrackError):
    pass


class DuplicateKey(TrackError):
    pass


class BadSignature(TrackError):
    pass


class RevokedIdentity(TrackError):
    pass


# ledger
class EmptyList(TrackError):
    pass


class InvalidTx(TrackError):
    pass


class QuorumNotMet(TrackError):
    pass


class NotFound(TrackError):
    pass


# consensus
class InvalidClusterSize(TrackError):
    pass


class UnknownNode(TrackError):
    pass


class NotLeader(TrackError):
    def __init__(self, leader_hint):
        super().__init__(f"not leader; try {leader_hint!r}")
        self.leader_hint = leader_hint


# layers
class EmptyAuthSet(TrackError):
    pass


class UnknownKind(TrackError):
    pass


# telemetry
class InvalidScenario(TrackError):
    pass


class EmptyBatch(TrackError):
    pass


class NotAssigned(TrackError):
    pass


# lifecycle
class IllegalTransition(TrackError):
    def __init__(self, state, event):
        super().__init__(f"no transition for {event} in state {state}")
        self.state = state
        self.event = event


class WrongRole(TrackError):
    pass


class WrongParty(TrackError):
    pass


class AlreadySigned(TrackError):
    pass


class WrongState(TrackError):
    pass


# attestation
class ClaimFalse(TrackError):
    def __init__(self, index: int):
        super().__init__(f"claim violated at leaf {index}")
        self.index = index


class CommitmentMismatch(TrackError):
    pass


class AuditFailure(TrackError):
    def __init__(self, index: int, why: str):
        super().__init__(f"audit failed at leaf {index}: {why}")
        self.index = index
        self.why = why


class PeriodOpen(TrackError):
    pass


# bench / cli
class InvalidSpec(TrackError):
    pass


class ConfigError(TrackError):
    pass
