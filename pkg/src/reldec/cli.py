"""Command line entry point.

Exit status: 0 when every assertion passes, 2 when an assertion fails,
1 for usage or spec errors.
"""
from __future__ import annotations

import argparse
import csv
import io
import sys
from dataclasses import dataclass

from .beable import build_ensemble, frequency_report, verify_conditional_state_theorem
from .qstate import StateError
from .scenario import ScenarioError, SplitError, load_scenario, resolve_scenario, run_scenario
from .serialization import (
    SpecError,
    dumps_report,
    load_json,
    parse_beable,
    parse_ket,
    parse_layout,
    parse_observable,
)
from .witness import grid_certificate, optimize_witness

EXIT_OK, EXIT_ERROR, EXIT_FAIL = 0, 1, 2
DEFAULT_SHOTS = 100000


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


@dataclass(frozen=True)
class RunConfig:
    command: str
    name: str | None = None
    spec: str | None = None
    shots: int | None = None
    seed: int | None = None
    z_crit: float = 3.0
    threads: int = 1
    out: str | None = None
    format: str = "json"
    certify: bool = False

    def __post_init__(self):
        if self.shots is not None and self.shots < 1:
            raise UsageError("--shots must be at least 1")
        if self.seed is not None and not 0 <= self.seed < 2 ** 64:
            raise UsageError("--seed must be a 64-bit unsigned value")
        if not self.z_crit > 0:
            raise UsageError("--zcrit must be positive")
        if self.threads < 1:
            raise UsageError("--threads must be at least 1")


def _csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["step", "op", "assertion", "expected", "observed", "passed"])
    for r in rows:
        w.writerow([r["step"], r["op"], r["assertion"], r["expected"], r["observed"], r["passed"]])
    return buf.getvalue()


def _emit(config: RunConfig, report: dict, rows) -> None:
    text = dumps_report(report) if config.format == "json" else _csv(rows)
    if config.out:
        with open(config.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _problem(config: RunConfig, need_observable: bool = False):
    if not config.spec:
        raise UsageError("--spec is required")
    data = load_json(config.spec)
    layout = parse_layout(data.get("layout"))
    psi = parse_ket(data.get("state"), layout)
    beable = parse_beable(data.get("beable"), layout)
    keep = data.get("keep")
    keep = layout.ordered([str(k) for k in keep]) if keep else layout.complement(beable.subsystems)
    c1 = None
    if need_observable:
        c1 = parse_observable(data.get("observable"), layout.dim_of(keep))
    return data, psi, beable, keep, c1


def _run_cfg(config: RunConfig, data: dict):
    shots = config.shots if config.shots is not None else data.get("shots", DEFAULT_SHOTS)
    seed = config.seed if config.seed is not None else data.get("seed", 0)
    return {"shots": shots, "seed": seed, "z_crit": config.z_crit}


def cmd_scenario(config: RunConfig) -> int:
    if bool(config.name) == bool(config.spec):
        raise UsageError("give exactly one of --name or --spec")
    if config.name:
        try:
            spec = resolve_scenario(config.name)
        except KeyError:
            raise UsageError(f"unknown scenario {config.name!r}") from None
    else:
        spec = load_scenario(config.spec)
    spec = spec.with_sampling(config.shots, config.seed)
    report = run_scenario(spec, config.z_crit, config.threads)
    body = report.to_dict()
    body["config"] = {"shots": spec.n, "seed": spec.seed, "z_crit": config.z_crit}
    _emit(config, body, report.assertions)
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_verify_theorem(config: RunConfig) -> int:
    data, psi, beable, keep, c1 = _problem(config, need_observable=True)
    cfg = _run_cfg(config, data)
    rep = verify_conditional_state_theorem(psi, beable, c1, cfg["shots"], cfg["seed"], config.z_crit, keep,
                                           config.threads)
    body = rep.to_dict()
    body["config"] = cfg
    rows = [
        {"step": e["index"], "op": "verify-theorem", "assertion": f"value {e['value']}",
         "expected": e["theory"], "observed": e["mean"], "passed": e["passed"] if e["passed"] is not None else "skipped"}
        for e in body["entries"]
    ]
    _emit(config, body, rows)
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_frequencies(config: RunConfig) -> int:
    data, psi, beable, _, _ = _problem(config)
    cfg = _run_cfg(config, data)
    ens = build_ensemble(psi, beable, cfg["shots"], cfg["seed"], config.threads)
    rep = frequency_report(ens, config.z_crit)
    body = rep.to_dict()
    body["config"] = cfg
    rows = [
        {"step": e["index"], "op": "frequencies", "assertion": f"|z| <= {config.z_crit}",
         "expected": e["weight"], "observed": e["frequency"], "passed": abs(e["z"]) <= config.z_crit}
        for e in body["entries"]
    ]
    _emit(config, body, rows)
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_witness(config: RunConfig) -> int:
    data, psi, beable, keep, _ = _problem(config)
    opts = data.get("witness", {})
    seed = config.seed if config.seed is not None else data.get("seed", 0)
    p1 = opts.get("p1_subsystems")
    res = optimize_witness(psi, beable, int(opts.get("restarts", 8)), int(opts.get("steps", 200)), seed, p1,
                           config.threads)
    body = res.to_dict()
    if config.certify:
        body["certificate"] = grid_certificate(psi, beable, int(opts.get("resolution", 64)), p1)
    body["config"] = {"seed": seed}
    rows = []
    passed = True
    expect = data.get("expect", {})
    if "gap_min" in expect:
        ok = body["gap"] >= expect["gap_min"]
        passed &= ok
        rows.append({"step": 0, "op": "witness", "assertion": "gap_min", "expected": expect["gap_min"],
                     "observed": body["gap"], "passed": ok})
    if "gap_max" in expect:
        ok = body["gap"] <= expect["gap_max"]
        passed &= ok
        rows.append({"step": 0, "op": "witness", "assertion": "gap_max", "expected": expect["gap_max"],
                     "observed": body["gap"], "passed": ok})
    body["passed"] = bool(passed)
    _emit(config, body, rows)
    return EXIT_OK if passed else EXIT_FAIL


COMMANDS = {
    "scenario": cmd_scenario,
    "verify-theorem": cmd_verify_theorem,
    "frequencies": cmd_frequencies,
    "witness": cmd_witness,
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="reldec", description="Relative-decoherence simulations and checks.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        if name == "scenario":
            p.add_argument("--name", help="built-in scenario or <name>.json under $RELDEC_SCENARIO_DIR")
        p.add_argument("--spec", help="path to a JSON spec file")
        if name != "witness":
            p.add_argument("--shots", type=int, help="ensemble size N")
            p.add_argument("--zcrit", type=float, default=3.0, help="critical |z| for statistical checks")
        p.add_argument("--seed", type=int, help="64-bit seed; the only source of randomness")
        p.add_argument("--threads", type=int, default=1, help="worker cap; results do not depend on it")
        p.add_argument("--out", help="report path (default: stdout)")
        p.add_argument("--format", choices=["json", "csv"], default="json")
        if name == "witness":
            p.add_argument("--certify", action="store_true", help="add the grid-oracle certificate")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = RunConfig(
            command=args.command,
            name=getattr(args, "name", None),
            spec=args.spec,
            shots=getattr(args, "shots", None),
            seed=args.seed,
            z_crit=getattr(args, "zcrit", 3.0),
            threads=args.threads,
            out=args.out,
            format=args.format,
            certify=getattr(args, "certify", False),
        )
        return COMMANDS[args.command](config)
    except (UsageError, SpecError, ScenarioError, SplitError, StateError, ValueError) as exc:
        print(f"reldec {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"reldec {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
