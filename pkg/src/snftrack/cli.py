"""Command-line entry point: ``snftrack <command> ...``.

Exit codes: 0 success, 2 policy denial, 3 verification failure or missed
benchmark target, 4 configuration or input error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import List, Optional

from . import __version__
from .errors import ConfigError, DuplicateKey, InvalidClusterSize, InvalidSpec, RevokedIdentity, TrackError, UnknownIdentity, UnknownOrganization

EXIT_OK, EXIT_DENIED, EXIT_VERIFY, EXIT_CONFIG = 0, 2, 3, 4
OUT_ENV = "SNFTRACK_OUT"


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def out_root() -> Path:
    return Path(os.environ.get(OUT_ENV) or "snftrack-out")


def work_dir(args, default_sub: str) -> Path:
    """``--out`` names the directory a command reads or writes; otherwise a subdirectory of the output root."""
    return Path(args.out) if getattr(args, "out", None) else out_root() / default_sub


def _emit(args, doc, text: str) -> None:
    if getattr(args, "format", "text") == "json":
        sys.stdout.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _need_file(path, what: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise CliError(EXIT_CONFIG, f"{what} file {str(p)!r} does not exist")
    return p


def _sibling(primary: Path, name: str, explicit) -> Optional[Path]:
    if explicit:
        return _need_file(explicit, name)
    p = primary.parent / name
    return p if p.exists() else None


# -- simulate ---------------------------------------------------------------


def cmd_simulate(args) -> int:
    from .simulate import SimulationConfig, run_pipeline, write_artifacts

    cfg = SimulationConfig.load(args.config)
    if args.seed is not None:
        cfg.consensus_seed = cfg.telemetry_seed = args.seed
    outcome = run_pipeline(cfg)
    dest = work_dir(args, "run")
    write_artifacts(outcome, dest)
    summary = outcome.summary()
    lines = [f"artifacts: {dest}"]
    for sid, s in summary["shipments"].items():
        lines.append(f"{sid}: {s['state']} (reached {', '.join(s['reached'])})")
    lines.append(f"committed {summary['committed_txs']}/{summary['submitted_txs']} txs in {summary['blocks']} blocks")
    lines.append(f"chain: {'ok' if summary['chain']['ok'] else summary['chain']['reason']}")
    lines.append(f"alerts: {len(summary['alerts'])}; attestations: {summary['attestations']}; "
                 f"public trace ok: {summary['public_trace_ok']}")
    for n in summary["notes"]:
        lines.append(f"note @{n.get('t_ms')}: {n.get('note')} {n.get('reason', '')}".rstrip())
    _emit(args, summary, "\n".join(lines))
    return EXIT_OK


# -- query ------------------------------------------------------------------


def _run_dir(args) -> Path:
    return Path(args.run) if args.run else work_dir(args, "run")


def cmd_query(args) -> int:
    from .identity import Registry
    from .layers import AccessPolicy, LayerTag, SideStores
    from .ledger import LedgerStore
    from .query import query

    run = _run_dir(args)
    ledger = _need_file(args.ledger or run / "ledger.ndjson", "ledger")
    registry = Registry.load(_need_file(args.registry or run / "registry.json", "registry"))
    pol = Path(args.policy) if args.policy else run / "policy.json"
    policy = AccessPolicy.load(_need_file(pol, "policy")) if args.policy or pol.exists() else AccessPolicy.default()
    side_dir = Path(args.sidestores) if args.sidestores else run / "sidestores"
    side = SideStores.load(side_dir) if side_dir.exists() else None
    try:
        layer = LayerTag(args.layer)
    except ValueError:
        raise CliError(EXIT_CONFIG, f"unknown layer {args.layer!r}") from None
    try:
        res = query(LedgerStore.load(ledger), registry, policy, side, args.identity, layer, args.shipment, args.tx_type)
    except UnknownIdentity as exc:
        raise CliError(EXIT_CONFIG, f"unknown identity {exc}") from None
    except RevokedIdentity as exc:
        raise CliError(EXIT_DENIED, f"identity {exc} is revoked") from None
    lines = [f"{res.identity_id} reads {res.layer.value}: {res.decision}"]
    for r in res.records:
        extra = " payload" if "payload" in r else (" anchor" if "anchor" in r else "")
        lines.append(f"  h={r['height']} {r['tx_type']} {r['shipment_id'] or '-'} t={r['sim_time_ms']}{extra}")
    _emit(args, res.to_json(), "\n".join(lines))
    return EXIT_OK if res.decision else EXIT_DENIED


# -- verify -----------------------------------------------------------------


def cmd_verify(args) -> int:
    from .attestation import SupervisoryRecord, load_attestations
    from .identity import Registry
    from .simulate import load_validators
    from .verification import all_passed, verify_artifacts

    ledger = _need_file(args.ledger, "ledger")
    reg_path = _sibling(ledger, "registry.json", args.registry)
    if reg_path is None:
        raise CliError(EXIT_CONFIG, "no registry given and none next to the ledger")
    registry = Registry.load(reg_path)
    validators = quorum = None
    vpath = _sibling(ledger, "validators.json", args.validators)
    if vpath is not None:
        validators, quorum = load_validators(vpath)
    atts = load_attestations(_need_file(args.attestations, "attestation")) if args.attestations else None
    rpath = _sibling(ledger, "supervisory_records.json", args.records)
    records = None
    if rpath is not None:
        records = [SupervisoryRecord.from_json(d) for d in json.loads(rpath.read_text())]
    checks = verify_artifacts(ledger, registry, validators, quorum, atts, records)
    text = "\n".join(f"{c.name:<13} {c.status.upper():<8} {c.detail}" for c in checks)
    ok = all_passed(checks)
    _emit(args, {"ok": ok, "checks": [c.to_json() for c in checks]}, text)
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_ledger_verify(args) -> int:
    from .identity import Registry
    from .ledger import LedgerStore, ParseError, verify_chain
    from .simulate import load_validators

    ledger = _need_file(args.ledger, "ledger")
    validators = quorum = None
    vpath = _sibling(ledger, "validators.json", args.validators)
    if vpath is not None:
        validators, quorum = load_validators(vpath)
    elif args.registry:
        validators = Registry.load(_need_file(args.registry, "registry")).validators or None
    try:
        store = LedgerStore.load(ledger)
    except ParseError as exc:
        _emit(args, {"ok": False, "height": None, "reason": f"ParseError: {exc}"}, f"FAIL parse error: {exc}")
        return EXIT_VERIFY
    res = verify_chain(store, validators, quorum)
    doc = {"ok": res.ok, "height": res.height, "reason": res.reason, "blocks": len(store)}
    _emit(args, doc, f"OK {len(store)} blocks" if res.ok else f"FAIL {res.reason} at height {res.height}")
    return EXIT_OK if res.ok else EXIT_VERIFY


# -- identity ---------------------------------------------------------------


def _registry_path(args) -> Path:
    return Path(args.registry) if args.registry else work_dir(args, "run") / "registry.json"


def cmd_identity(args) -> int:
    from .identity import OrgType, Registry, Role, Signer, keystore_json, load_keystore

    path = _registry_path(args)
    if args.action == "keygen":
        store = Path(args.keystore)
        keys = load_keystore(store) if store.exists() else {}
        if args.id in keys:
            raise CliError(EXIT_CONFIG, f"keystore already holds a key for {args.id}")
        seed = args.seed_phrase or os.urandom(32).hex()
        keys[args.id] = Signer.from_seed(args.id, seed)
        store.write_text(json.dumps(keystore_json(keys.values()), indent=2, sort_keys=True) + "\n")
        pk = keys[args.id].public_key.hex()
        _emit(args, {"identity_id": args.id, "public_key": pk}, pk)
        return EXIT_OK
    registry = Registry.load(path) if path.exists() else Registry()
    if args.action == "list":
        doc = registry.to_json()["identities"]
        lines = [f"{i['identity_id']:<22} {i['role']:<24} {i['org_id']:<18}"
                 f"{' REVOKED' if i['revoked'] else ''} {','.join(i['assigned_shipments'])}" for i in doc]
        _emit(args, doc, "\n".join(lines) or "(no identities)")
        return EXIT_OK
    if args.action == "register":
        if args.public_key:
            pk = bytes.fromhex(args.public_key)
        elif args.keystore:
            keys = load_keystore(_need_file(args.keystore, "keystore"))
            if args.id not in keys:
                raise CliError(EXIT_CONFIG, f"keystore has no key for {args.id}")
            pk = keys[args.id].public_key
        else:
            raise CliError(EXIT_CONFIG, "register needs --public-key or --keystore")
        if args.org not in registry.organizations:
            registry.add_organization(args.org, args.org, OrgType(args.org_type))
        ident = registry.register_identity(args.org, Role(args.role), pk, identity_id=args.id)
        for sid in args.assign or []:
            registry.assign(ident.identity_id, sid)
        msg = f"registered {ident.identity_id}"
    else:
        registry.revoke(args.id)
        msg = f"revoked {args.id}"
    path.parent.mkdir(parents=True, exist_ok=True)
    registry.save(path)
    _emit(args, {"ok": True, "message": msg, "registry": str(path)}, msg)
    return EXIT_OK


# -- bench ------------------------------------------------------------------


def _bench_dir(args) -> Path:
    return work_dir(args, "bench")


def cmd_bench_run(args) -> int:
    from .bench import WorkloadSpec, emit_report, missed_targets, run_bench
    from .identity import Registry
    from .layers import AccessPolicy

    spec = WorkloadSpec.load(_need_file(args.spec, "spec"))
    if args.seed is not None:
        spec.seed = args.seed
    policy = AccessPolicy.load(_need_file(args.policy, "policy")) if args.policy else None
    registry = Registry.load(_need_file(args.registry, "registry")) if args.registry else None
    bench = run_bench(spec, policy, registry, tamper_n=args.tamper_n, audit_trials=args.audit_trials)
    dest = _bench_dir(args)
    emit_report(bench, dest, plots=not args.no_plots)
    missed = missed_targets(bench.metrics)
    m = bench.metrics
    text = [f"report: {dest}",
            f"tps {m.tps:.3f}; latency p50/p95/max {m.latency_ms['p50']}/{m.latency_ms['p95']}/{m.latency_ms['max']} ms",
            f"access rejection {m.unauthorized_rejection_rate} grant {m.authorized_grant_rate}",
            f"tamper detection {m.tamper_detection_rate}; public trace {m.public_verifiability_rate}"
            f"/{m.public_mutation_detection_rate}",
            f"audit detection {m.audit_detection_rate:.4f} (expected {m.audit_expected_detection_rate:.4f})",
            f"availability under fault {m.availability_under_fault:.3f}"]
    text += [f"MISSED: {x}" for x in missed]
    _emit(args, {"metrics": m.to_json(), "missed_targets": missed, "report": str(dest)}, "\n".join(text))
    return EXIT_VERIFY if missed else EXIT_OK


def cmd_bench_access(args) -> int:
    from .bench import access_battery
    from .demo import bundled_demo_dir
    from .identity import Registry
    from .layers import AccessPolicy

    policy = AccessPolicy.load(_need_file(args.policy, "policy"))
    reg_path = Path(args.registry) if args.registry else bundled_demo_dir() / "registry.json"
    registry = Registry.load(_need_file(reg_path, "registry"))
    res = access_battery(policy, registry, seed=args.seed or 0)
    lines = [f"rejection rate {res.rejection_rate}  grant rate {res.grant_rate}  "
             f"({res.grid_cases} grid + {res.random_cases} random cases)"]
    if res.vacuous:
        lines.append("VACUOUS: the registry holds no identities, random cases were not run")
    for c in res.offending:
        lines.append(f"offending cell: {c['role']} {c['layer']}.{c['action']} assigned={c['assigned']} "
                     f"expected {c['expected']} got {c['got']} (policy says {c['policy_rule']})")
    _emit(args, res.to_json(), "\n".join(lines))
    return EXIT_OK if res.passed else EXIT_VERIFY


def cmd_bench_tamper(args) -> int:
    from .bench import tamper_battery
    from .identity import Registry
    from .simulate import load_validators

    ledger = _need_file(args.ledger, "ledger")
    reg_path = _sibling(ledger, "registry.json", args.registry)
    if reg_path is None:
        raise CliError(EXIT_CONFIG, "no registry given and none next to the ledger")
    validators = quorum = None
    vpath = _sibling(ledger, "validators.json", args.validators)
    if vpath is not None:
        validators, quorum = load_validators(vpath)
    scratch = _need_file(args.scratch, "scratch").read_text() if args.scratch else None
    seed = args.seed if args.seed is not None else 7
    try:
        res = tamper_battery(ledger.read_text(), args.n, seed, Registry.load(reg_path), scratch, validators, quorum)
    except InvalidSpec as exc:
        raise CliError(EXIT_VERIFY, str(exc)) from None
    lines = [f"detection rate {res.detection_rate} ({res.detected}/{res.n}; {res.excluded} excluded; "
             f"{res.blocks} blocks)"] + res.flags
    lines += [f"UNDETECTED: {u}" for u in res.undetected]
    _emit(args, res.to_json(), "\n".join(lines))
    return EXIT_OK if res.detection_rate == 1.0 else EXIT_VERIFY


def cmd_bench_report(args) -> int:
    d = Path(args.from_dir) if args.from_dir else _bench_dir(args)
    src = d / ("metrics.csv" if args.format == "csv" else "metrics.json")
    sys.stdout.write(_need_file(src, "report").read_text())
    return EXIT_OK


# -- extras -----------------------------------------------------------------


def cmd_telemetry_dump(args) -> int:
    from .telemetry import RouteScenario, generate_readings, write_csv

    scen = RouteScenario.load(_need_file(args.scenario, "scenario"))
    readings = generate_readings(scen, args.seed if args.seed is not None else 0)
    dest = Path(args.csv) if args.csv else work_dir(args, "telemetry") / "telemetry.csv"
    dest.parent.mkdir(parents=True, exist_ok=True)
    write_csv(readings, dest)
    _emit(args, {"readings": len(readings), "csv": str(dest)}, f"{len(readings)} readings -> {dest}")
    return EXIT_OK


def cmd_consensus_run(args) -> int:
    from .consensus import audit_trace, load_script, run_simulation

    script = load_script(_need_file(args.script, "fault script")) if args.script else []
    workload = [(i * args.interval_ms, f"tx{i:05d}") for i in range(args.txs)]
    res = run_simulation(args.n, script, workload, args.seed if args.seed is not None else 0,
                         until_ms=args.until_ms)
    audit = audit_trace(res.trace)
    doc = {"committed": len(res.applied()), "submitted": args.txs, "audit_ok": audit.ok,
           "election_violations": audit.election_violations, "log_matching_violations": audit.log_matching_violations}
    if args.trace:
        Path(args.trace).write_text(res.trace_ndjson())
    _emit(args, doc, f"committed {doc['committed']}/{args.txs}; safety audit {'ok' if audit.ok else 'FAILED'}")
    return EXIT_OK if audit.ok else EXIT_VERIFY


def cmd_demo_init(args) -> int:
    from .demo import copy_demo

    d = copy_demo(args.directory)
    _emit(args, {"directory": str(d)}, f"demo bundle copied to {d}")
    return EXIT_OK


# -- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    base = argparse.ArgumentParser(add_help=False)
    base.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="override the run's seed(s)")
    base.add_argument("--out", default=argparse.SUPPRESS, help=f"directory to write or read (default: a subdirectory of ${OUT_ENV}, else ./snftrack-out)")
    common = argparse.ArgumentParser(add_help=False, parents=[base])
    common.add_argument("--format", choices=["text", "json"], default=argparse.SUPPRESS, help="output format")

    p = argparse.ArgumentParser(prog="snftrack", description="Layered permissioned ledger for spent-fuel shipment tracking.",
                                parents=[common])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="run an end-to-end transport simulation")
    s.add_argument("--config", required=True)
    s.set_defaults(func=cmd_simulate)

    q = sub.add_parser("query", parents=[common], help="read the ledger as a given identity")
    q.add_argument("--as", dest="identity", required=True)
    q.add_argument("--layer", required=True, choices=["Operational", "Supervisory", "Public"])
    q.add_argument("--shipment")
    q.add_argument("--type", dest="tx_type")
    q.add_argument("--run", help="artifact directory from simulate (default --out, else <root>/run)")
    q.add_argument("--ledger")
    q.add_argument("--registry")
    q.add_argument("--policy")
    q.add_argument("--sidestores")
    q.set_defaults(func=cmd_query)

    v = sub.add_parser("verify", parents=[common], help="verify chain, signatures, inclusion, attestations, public trace")
    v.add_argument("--ledger", required=True)
    v.add_argument("--attestations")
    v.add_argument("--registry")
    v.add_argument("--validators")
    v.add_argument("--records")
    v.set_defaults(func=cmd_verify)

    lg = sub.add_parser("ledger", help="ledger utilities").add_subparsers(dest="ledger_cmd", required=True)
    lv = lg.add_parser("verify", parents=[common], help="hash-chain and commit-signature check only")
    lv.add_argument("--ledger", required=True)
    lv.add_argument("--registry")
    lv.add_argument("--validators")
    lv.set_defaults(func=cmd_ledger_verify)

    idp = sub.add_parser("identity", help="manage the identity registry").add_subparsers(dest="action", required=True)
    for name in ("register", "revoke", "list", "keygen"):
        ip = idp.add_parser(name, parents=[common])
        ip.add_argument("--registry", help="registry file (default <--out or root/run>/registry.json)")
        ip.set_defaults(func=cmd_identity)
        if name in ("register", "revoke", "keygen"):
            ip.add_argument("--id", required=True)
        if name == "register":
            ip.add_argument("--org", required=True)
            ip.add_argument("--org-type", default="Producer")
            ip.add_argument("--role", required=True)
            ip.add_argument("--public-key", help="raw Ed25519 public key, hex")
            ip.add_argument("--keystore")
            ip.add_argument("--assign", action="append", metavar="SHIPMENT")
        if name == "keygen":
            ip.add_argument("--keystore", required=True)
            ip.add_argument("--seed-phrase", help="derive the key deterministically from this phrase")

    bp = sub.add_parser("bench", help="benchmarks").add_subparsers(dest="bench_cmd", required=True)
    br = bp.add_parser("run", parents=[common])
    br.add_argument("--spec", required=True)
    br.add_argument("--policy")
    br.add_argument("--registry", help="registry for the access battery (default: bundled demo)")
    br.add_argument("--tamper-n", type=int, default=500)
    br.add_argument("--audit-trials", type=int, default=10_000)
    br.add_argument("--no-plots", action="store_true")
    br.set_defaults(func=cmd_bench_run)
    ba = bp.add_parser("access", parents=[common])
    ba.add_argument("--policy", required=True)
    ba.add_argument("--registry")
    ba.set_defaults(func=cmd_bench_access)
    bt = bp.add_parser("tamper", parents=[common])
    bt.add_argument("--ledger", required=True)
    bt.add_argument("-n", type=int, default=500)
    bt.add_argument("--registry")
    bt.add_argument("--validators")
    bt.add_argument("--scratch", help="uncommitted file whose mutations are excluded from the rate")
    bt.set_defaults(func=cmd_bench_tamper)
    bre = bp.add_parser("report", parents=[base])
    bre.add_argument("--format", choices=["csv", "json"], default="json")
    bre.add_argument("--from", dest="from_dir", help="bench output directory (default --out, else <root>/bench)")
    bre.set_defaults(func=cmd_bench_report)

    tp = sub.add_parser("telemetry", help="sensor streams").add_subparsers(dest="telemetry_cmd", required=True)
    td = tp.add_parser("dump", parents=[common])
    td.add_argument("--scenario", required=True)
    td.add_argument("--csv")
    td.set_defaults(func=cmd_telemetry_dump)

    cp = sub.add_parser("consensus", help="ordering service").add_subparsers(dest="consensus_cmd", required=True)
    cr = cp.add_parser("run", parents=[common])
    cr.add_argument("--n", type=int, default=3)
    cr.add_argument("--script")
    cr.add_argument("--txs", type=int, default=50)
    cr.add_argument("--interval-ms", type=int, default=100)
    cr.add_argument("--until-ms", type=int)
    cr.add_argument("--trace")
    cr.set_defaults(func=cmd_consensus_run)

    dp = sub.add_parser("demo", help="bundled demo data").add_subparsers(dest="demo_cmd", required=True)
    di = dp.add_parser("init", parents=[common])
    di.add_argument("directory")
    di.set_defaults(func=cmd_demo_init)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    for name, default in (("seed", None), ("out", None), ("format", "text")):
        if not hasattr(args, name):
            setattr(args, name, default)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (ConfigError, InvalidSpec, InvalidClusterSize, UnknownIdentity, UnknownOrganization, DuplicateKey) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, KeyError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TrackError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_VERIFY


if __name__ == "__main__":
    sys.exit(main())
