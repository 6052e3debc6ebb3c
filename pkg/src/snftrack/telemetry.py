"""Sensor suite simulation along a route, edge aggregation and batch packaging."""

from __future__ import annotations

import csv
import json
import math
import random
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

from .errors import EmptyBatch, InvalidScenario, NotAssigned
from .identity import Identity, Signer
from .layers import LayerTag, SideStores
from .ledger import Transaction, TxType


class SensorType(str, Enum):
    Gps = "Gps"
    Radiation = "Radiation"
    Temperature = "Temperature"
    Shock = "Shock"
    TamperSeal = "TamperSeal"
    Rfid = "Rfid"


SENSOR_ORDER = {s: i for i, s in enumerate(SensorType)}
SCALAR_SENSORS = (SensorType.Radiation, SensorType.Temperature, SensorType.Shock, SensorType.TamperSeal)

Value = Union[float, bool, str, Tuple[float, float]]


@dataclass(frozen=True)
class SensorReading:
    shipment_id: str
    sensor: SensorType
    seq: int
    sim_time_ms: int
    value: Value

    @property
    def scalar(self) -> float:
        """Numeric view used by thresholds; seal intact maps to 1.0."""
        if self.sensor in (SensorType.Gps, SensorType.Rfid):
            raise TypeError(f"{self.sensor.value} readings have no scalar value")
        return float(self.value)

    def to_json(self) -> dict:
        v = list(self.value) if self.sensor is SensorType.Gps else self.value
        return {"shipment_id": self.shipment_id, "sensor": self.sensor.value, "seq": self.seq,
                "t_ms": self.sim_time_ms, "value": v}

    @classmethod
    def from_json(cls, d: dict) -> "SensorReading":
        sensor = SensorType(d["sensor"])
        v = d["value"]
        if sensor is SensorType.Gps:
            v = (float(v[0]), float(v[1]))
        return cls(d["shipment_id"], sensor, int(d["seq"]), int(d["t_ms"]), v)


class EventKind(str, Enum):
    RadiationSpike = "RadiationSpike"
    ShockImpact = "ShockImpact"
    SealBreak = "SealBreak"
    GpsDropout = "GpsDropout"


@dataclass(frozen=True)
class InjectedEvent:
    sim_time_ms: int
    kind: EventKind
    magnitude: float = 0.0
    # Spikes default to one radiation sampling interval; dropouts use magnitude as ms.
    duration_ms: Optional[int] = None


DEFAULT_CADENCES: Dict[SensorType, Optional[int]] = {
    SensorType.Gps: 60_000,
    SensorType.Radiation: 10_000,
    SensorType.Temperature: 30_000,
    SensorType.Shock: None,  # event driven
    SensorType.TamperSeal: 10_000,
    SensorType.Rfid: None,  # at waypoints
}

DEFAULT_BASELINES: Dict[SensorType, Tuple[float, float]] = {
    SensorType.Radiation: (1.0, 0.05),
    SensorType.Temperature: (35.0, 0.5),
}


@dataclass
class RouteScenario:
    shipment_id: str
    waypoints: List[Tuple[float, float, int]]
    cadences: Dict[SensorType, Optional[int]] = field(default_factory=lambda: dict(DEFAULT_CADENCES))
    baselines: Dict[SensorType, Tuple[float, float]] = field(default_factory=lambda: dict(DEFAULT_BASELINES))
    injected_events: List[InjectedEvent] = field(default_factory=list)
    gps_sigma_deg: float = 1e-4
    rfid_tag: str = ""

    @property
    def start_ms(self) -> int:
        return self.waypoints[0][2]

    @property
    def end_ms(self) -> int:
        return self.waypoints[-1][2]

    def validate(self) -> None:
        if len(self.waypoints) < 2:
            raise InvalidScenario("a route needs at least two waypoints")
        times = [w[2] for w in self.waypoints]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise InvalidScenario("waypoint times must be strictly increasing")
        for s, c in self.cadences.items():
            if c is not None and c <= 0:
                raise InvalidScenario(f"cadence for {s.value} must be positive")
        for lat, lon, _ in self.waypoints:
            if abs(lat) > 90 or abs(lon) > 180:
                raise InvalidScenario(f"waypoint ({lat}, {lon}) out of range")

    def to_json(self) -> dict:
        return {
            "shipment_id": self.shipment_id,
            "waypoints": [list(w) for w in self.waypoints],
            "cadences": {s.value: c for s, c in self.cadences.items()},
            "baselines": {s.value: list(b) for s, b in self.baselines.items()},
            "events": [
                {"t_ms": e.sim_time_ms, "kind": e.kind.value, "magnitude": e.magnitude, "duration_ms": e.duration_ms}
                for e in self.injected_events
            ],
            "gps_sigma_deg": self.gps_sigma_deg,
            "rfid_tag": self.rfid_tag,
        }

    @classmethod
    def from_json(cls, d: dict) -> "RouteScenario":
        cadences = dict(DEFAULT_CADENCES)
        cadences.update({SensorType(k): v for k, v in d.get("cadences", {}).items()})
        baselines = dict(DEFAULT_BASELINES)
        baselines.update({SensorType(k): (float(v[0]), float(v[1])) for k, v in d.get("baselines", {}).items()})
        events = [
            InjectedEvent(int(e["t_ms"]), EventKind(e["kind"]), float(e.get("magnitude", 0.0)), e.get("duration_ms"))
            for e in d.get("events", [])
        ]
        return cls(
            shipment_id=d["shipment_id"],
            waypoints=[(float(w[0]), float(w[1]), int(w[2])) for w in d["waypoints"]],
            cadences=cadences,
            baselines=baselines,
            injected_events=events,
            gps_sigma_deg=float(d.get("gps_sigma_deg", 1e-4)),
            rfid_tag=d.get("rfid_tag", ""),
        )

    @classmethod
    def load(cls, path: str | Path) -> "RouteScenario":
        return cls.from_json(json.loads(Path(path).read_text()))


def interpolate(waypoints: Sequence[Tuple[float, float, int]], t: int) -> Tuple[float, float]:
    if t <= waypoints[0][2]:
        return waypoints[0][0], waypoints[0][1]
    for (la0, lo0, t0), (la1, lo1, t1) in zip(waypoints, waypoints[1:]):
        if t <= t1:
            f = (t - t0) / (t1 - t0)
            return la0 + f * (la1 - la0), lo0 + f * (lo1 - lo0)
    return waypoints[-1][0], waypoints[-1][1]


def _grid(start: int, end: int, step: int) -> range:
    return range(start, end + 1, step)


def generate_readings(scenario: RouteScenario, seed: int) -> List[SensorReading]:
    """Deterministic reading stream ordered by (time, sensor, seq)."""
    scenario.validate()
    sid = scenario.shipment_id
    start, end = scenario.start_ms, scenario.end_ms
    events = sorted(scenario.injected_events, key=lambda e: (e.sim_time_ms, e.kind.value))
    out: List[SensorReading] = []

    def rng_for(sensor: SensorType) -> random.Random:
        return random.Random(f"{seed}/{sid}/{sensor.value}")

    def emit(sensor: SensorType, times: Iterable[int], value_at) -> None:
        seq = 0
        for t in times:
            v = value_at(t)
            if v is None:
                continue
            out.append(SensorReading(sid, sensor, seq, t, v))
            seq += 1

    cad = scenario.cadences

    if cad.get(SensorType.Gps):
        rng = rng_for(SensorType.Gps)
        dropouts = [(e.sim_time_ms, e.sim_time_ms + int(e.duration_ms or e.magnitude))
                    for e in events if e.kind is EventKind.GpsDropout]

        def gps(t):
            lat, lon = interpolate(scenario.waypoints, t)
            jitter = (rng.gauss(0.0, scenario.gps_sigma_deg), rng.gauss(0.0, scenario.gps_sigma_deg))
            if any(a <= t < b for a, b in dropouts):
                return None
            return (round(lat + jitter[0], 6), round(lon + jitter[1], 6))

        emit(SensorType.Gps, _grid(start, end, cad[SensorType.Gps]), gps)

    if cad.get(SensorType.Radiation):
        rng = rng_for(SensorType.Radiation)
        base, noise = scenario.baselines.get(SensorType.Radiation, DEFAULT_BASELINES[SensorType.Radiation])
        step = cad[SensorType.Radiation]
        spikes = [(e.sim_time_ms, e.sim_time_ms + int(e.duration_ms or step), e.magnitude)
                  for e in events if e.kind is EventKind.RadiationSpike]

        def radiation(t):
            v = base + (rng.gauss(0.0, noise) if noise else 0.0)
            v += sum(m for a, b, m in spikes if a <= t < b)
            return round(max(v, 0.0), 4)

        emit(SensorType.Radiation, _grid(start, end, step), radiation)

    if cad.get(SensorType.Temperature):
        rng = rng_for(SensorType.Temperature)
        base, noise = scenario.baselines.get(SensorType.Temperature, DEFAULT_BASELINES[SensorType.Temperature])

        def temperature(t):
            return round(base + (rng.gauss(0.0, noise) if noise else 0.0), 4)

        emit(SensorType.Temperature, _grid(start, end, cad[SensorType.Temperature]), temperature)

    shocks = [e for e in events if e.kind is EventKind.ShockImpact]
    if cad.get(SensorType.Shock):
        rng = rng_for(SensorType.Shock)
        base, noise = scenario.baselines.get(SensorType.Shock, (0.5, 0.1))
        times = sorted(set(_grid(start, end, cad[SensorType.Shock])) | {e.sim_time_ms for e in shocks})
        peaks = {}
        for e in shocks:
            peaks[e.sim_time_ms] = max(peaks.get(e.sim_time_ms, 0.0), e.magnitude)

        def shock(t):
            v = abs(base + (rng.gauss(0.0, noise) if noise else 0.0))
            return round(max(v, peaks.get(t, 0.0)), 4)

        emit(SensorType.Shock, times, shock)
    else:
        peaks = {}
        for e in shocks:
            peaks[e.sim_time_ms] = max(peaks.get(e.sim_time_ms, 0.0), e.magnitude)
        emit(SensorType.Shock, sorted(peaks), lambda t: round(peaks[t], 4))

    if cad.get(SensorType.TamperSeal):
        breaks = [e.sim_time_ms for e in events if e.kind is EventKind.SealBreak]
        broken_at = min(breaks) if breaks else None
        emit(SensorType.TamperSeal, _grid(start, end, cad[SensorType.TamperSeal]),
             lambda t: broken_at is None or t < broken_at)

    tag = scenario.rfid_tag or f"TAG-{sid}"
    rfid_cadence = cad.get(SensorType.Rfid)
    rfid_times = _grid(start, end, rfid_cadence) if rfid_cadence else [w[2] for w in scenario.waypoints]
    emit(SensorType.Rfid, rfid_times, lambda t: tag)

    out.sort(key=lambda r: (r.sim_time_ms, SENSOR_ORDER[r.sensor], r.seq))
    return out


# -- alert rules and edge aggregation ----------------------------------------


class Severity(str, Enum):
    Info = "Info"
    Warning = "Warning"
    Critical = "Critical"


@dataclass(frozen=True)
class AlertRule:
    rule_id: str
    sensor: SensorType
    comparator: str
    threshold: float
    severity: Severity = Severity.Warning

    def __post_init__(self):
        if self.comparator not in (">", "<", "=="):
            raise ValueError(f"unknown comparator {self.comparator!r}")
        if not math.isfinite(self.threshold):
            raise ValueError("threshold must be finite")

    def violated(self, value: float) -> bool:
        value = float(value)
        if self.comparator == ">":
            return value > self.threshold
        if self.comparator == "<":
            return value < self.threshold
        return value == self.threshold

    def to_json(self) -> dict:
        return {"rule_id": self.rule_id, "sensor": self.sensor.value, "comparator": self.comparator,
                "threshold": self.threshold, "severity": self.severity.value}

    @classmethod
    def from_json(cls, d: dict) -> "AlertRule":
        return cls(d["rule_id"], SensorType(d["sensor"]), d["comparator"], float(d["threshold"]),
                   Severity(d.get("severity", "Warning")))


def default_rules(radiation_baseline: float = 1.0) -> List[AlertRule]:
    """Configuration defaults; none of these numbers come from a regulation."""
    return [
        AlertRule("radiation-excess", SensorType.Radiation, ">", radiation_baseline + 2.0, Severity.Critical),
        AlertRule("shock-impact", SensorType.Shock, ">", 25.0, Severity.Warning),
        AlertRule("temperature-high", SensorType.Temperature, ">", 85.0, Severity.Warning),
        AlertRule("seal-broken", SensorType.TamperSeal, "==", 0.0, Severity.Critical),
    ]


def load_rules(path: str | Path) -> List[AlertRule]:
    return [AlertRule.from_json(d) for d in json.loads(Path(path).read_text())]


@dataclass(frozen=True)
class EdgeSummary:
    shipment_id: str
    sensor: SensorType
    window: Tuple[int, int]
    count: int
    min: float
    max: float
    mean: float
    anomaly_flags: Tuple[Tuple[int, str], ...] = ()

    def to_json(self) -> dict:
        return {"shipment_id": self.shipment_id, "sensor": self.sensor.value, "window": list(self.window),
                "count": self.count, "min": self.min, "max": self.max, "mean": self.mean,
                "anomaly_flags": [list(f) for f in self.anomaly_flags]}


def edge_aggregate(stream: Iterable[SensorReading], window_ms: int, rules: Sequence[AlertRule] = ()) -> List[EdgeSummary]:
    """Tumbling windows aligned at t=0 over scalar sensors; GPS and RFID pass through raw."""
    if window_ms <= 0:
        raise ValueError("window_ms must be positive")
    groups: Dict[Tuple[str, int, SensorType], List[SensorReading]] = {}
    for r in stream:
        if r.sensor not in SCALAR_SENSORS:
            continue
        groups.setdefault((r.shipment_id, r.sim_time_ms // window_ms, r.sensor), []).append(r)
    out = []
    for (sid, w, sensor), rs in sorted(groups.items(), key=lambda kv: (kv[0][1], kv[0][0], SENSOR_ORDER[kv[0][2]])):
        vals = [r.scalar for r in rs]
        flags = tuple(
            (r.sim_time_ms, rule.rule_id)
            for r in rs
            for rule in rules
            if rule.sensor is sensor and rule.violated(r.scalar)
        )
        out.append(EdgeSummary(sid, sensor, (w * window_ms, (w + 1) * window_ms), len(vals),
                               min(vals), max(vals), math.fsum(vals) / len(vals), flags))
    return out


# -- packaging ---------------------------------------------------------------


def batch_payload(readings: Sequence[SensorReading], summaries: Sequence[EdgeSummary] = ()) -> bytes:
    sids = {r.shipment_id for r in readings} | {s.shipment_id for s in summaries}
    if len(sids) != 1:
        raise ValueError("a batch covers exactly one shipment")
    doc = {"shipment_id": sids.pop(), "readings": [r.to_json() for r in readings],
           "summaries": [s.to_json() for s in summaries]}
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()


def parse_batch(payload: bytes) -> Tuple[str, List[SensorReading]]:
    doc = json.loads(payload)
    return doc["shipment_id"], [SensorReading.from_json(r) for r in doc["readings"]]


def package_batch(
    readings: Sequence[SensorReading],
    carrier: Identity,
    signer: Signer,
    side_stores: SideStores,
    authorized_orgs: Iterable[str],
    salt: bytes,
    sim_time_ms: int,
    summaries: Sequence[EdgeSummary] = (),
    nonce: int = 0,
) -> Transaction:
    """Anchor the raw batch privately and return the signed operational tx."""
    if not readings and not summaries:
        raise EmptyBatch("nothing to package")
    payload = batch_payload(readings, summaries)
    sid = json.loads(payload)["shipment_id"]
    if sid not in carrier.assigned_shipments:
        raise NotAssigned(f"{carrier.identity_id} is not assigned to {sid}")
    anchor = side_stores.put_private(payload, salt, authorized_orgs, collection_id=f"telemetry/{sid}")
    return Transaction.create(signer, TxType.SensorBatch, sim_time_ms, LayerTag.Operational, anchor, sid, nonce)


def write_csv(readings: Iterable[SensorReading], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["shipment", "sensor", "seq", "t_ms", "value", "value2"])
        for r in readings:
            if r.sensor is SensorType.Gps:
                w.writerow([r.shipment_id, r.sensor.value, r.seq, r.sim_time_ms, r.value[0], r.value[1]])
            else:
                w.writerow([r.shipment_id, r.sensor.value, r.seq, r.sim_time_ms, r.value, ""])
