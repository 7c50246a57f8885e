"""Object/subject splits and declarative scenarios.

A :class:`Split` partitions the subsystems of a scenario into the object
of description and the subject. Attaching a beable to a subject-side
subsystem converts the environment into a subject; predictions for the
object are then made relative to the beable's values. Scenarios are JSON
documents listing split operations and analysis steps (``measure``,
``witness``) with explicit assertions; :func:`run_scenario` executes them
and returns a :class:`ScenarioReport`.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .beable import Z_CRIT, build_ensemble, frequency_report, verify_conditional_state_theorem
from .qstate import (
    TOL_ALG,
    TOL_BRANCH,
    BeableObservable,
    DensityOperator,
    Ket,
    StateError,
    SubsystemLayout,
    conditional_subsystem_state,
    event_probability,
    reduced_state,
)
from .serialization import (
    SpecError,
    density_to_json,
    load_json,
    parse_beable,
    parse_ket,
    parse_layout,
    parse_observable,
    parse_projector,
)
from .witness import grid_certificate, interference_term, optimize_witness

TOWARD_OBJECT = "toward-object"
TOWARD_SUBJECT = "toward-subject"
BUILTIN_SCENARIOS = ("measurement", "cat-i", "cat-ii", "wigner", "zurek")
SCENARIO_DIR_ENV = "RELDEC_SCENARIO_DIR"


class SplitError(ValueError):
    pass


class ScenarioError(RuntimeError):
    def __init__(self, step: int, reason: str):
        super().__init__(f"step {step}: {reason}")
        self.step = step
        self.reason = reason


@dataclass(frozen=True, eq=False)
class Split:
    """``O/S``: object labels, subject labels and an optional subject beable."""

    object_labels: tuple[str, ...]
    subject_labels: tuple[str, ...]
    subject_beable: BeableObservable | None = None

    def __post_init__(self):
        obj, subj = set(self.object_labels), set(self.subject_labels)
        if obj & subj:
            raise SplitError(f"object and subject share subsystems {sorted(obj & subj)}")
        if self.subject_beable is not None and not set(self.subject_beable.subsystems) <= subj:
            raise SplitError("subject beable must act on subject-side subsystems")

    def covers(self, layout: SubsystemLayout) -> bool:
        return set(self.object_labels) | set(self.subject_labels) == set(layout.labels)

    def describe(self) -> str:
        obj = "+".join(self.object_labels) or "nothing"
        subj = "+".join(self.subject_labels + ("rest",))
        return f"{obj}/({subj})" if len(self.subject_labels) else f"{obj}/(rest)"

    @property
    def subject_tag(self) -> str:
        if self.subject_beable is None:
            return "unconverted:" + "+".join(self.subject_labels + ("rest",))
        name = self.subject_beable.name or "beable"
        return f"{name}@{'+'.join(self.subject_beable.subsystems)}"

    def signature(self):
        b = self.subject_beable
        return (self.object_labels, self.subject_labels, None if b is None else (b.name, b.subsystems))


def initial_split(layout: SubsystemLayout, object_labels, subject_beable=None) -> Split:
    obj = layout.ordered(object_labels)
    return Split(obj, layout.complement(obj), subject_beable)


def shift_cut(split: Split, labels, direction: str) -> Split:
    """Move ``labels`` across the cut.

    ``toward-object`` broadens the object. Moving the subject beable's
    subsystem onto the object side drops the beable.
    """
    labels = (labels,) if isinstance(labels, str) else tuple(labels)
    if direction == TOWARD_OBJECT:
        src, dst = split.subject_labels, split.object_labels
    elif direction == TOWARD_SUBJECT:
        src, dst = split.object_labels, split.subject_labels
    else:
        raise SplitError(f"unknown direction {direction!r}")
    missing = [l for l in labels if l not in src]
    if missing:
        raise SplitError(f"labels {missing} are not on the source side of the cut")
    order = split.object_labels + split.subject_labels
    new_src = tuple(l for l in src if l not in labels)
    new_dst = tuple(l for l in order if l in dst or l in labels)
    if direction == TOWARD_OBJECT:
        obj, subj = new_dst, new_src
    else:
        obj, subj = new_src, new_dst
    beable = split.subject_beable
    if beable is not None and not set(beable.subsystems) <= set(subj):
        beable = None
    return Split(obj, subj, beable)


def convert_environment_to_subject(split: Split, beable: BeableObservable, replace_existing: bool = False) -> Split:
    if not set(beable.subsystems) <= set(split.subject_labels):
        raise SplitError(f"beable on {beable.subsystems} is not on the subject side {split.subject_labels}")
    if split.subject_beable is not None and not replace_existing:
        raise SplitError("split already carries a subject beable; pass replace_existing to swap it")
    return Split(split.object_labels, split.subject_labels, beable)


@dataclass(frozen=True, eq=False)
class ScenarioSpec:
    name: str
    layout: SubsystemLayout
    state: Ket
    split: Split
    beables: dict
    steps: tuple
    n: int
    seed: int
    description: str = ""

    @classmethod
    def from_dict(cls, data: dict, source: str = "spec") -> "ScenarioSpec":
        if data.get("schema", 1) != 1:
            raise SpecError("schema", f"unsupported schema version {data.get('schema')!r}")
        name = data.get("name")
        if not isinstance(name, str):
            raise SpecError("name", "expected a scenario name")
        layout = parse_layout(data.get("layout"))
        state = parse_ket(data.get("state"), layout)
        beables = {}
        raw_beables = data.get("beables", {})
        if not isinstance(raw_beables, dict):
            raise SpecError("beables", "expected an object mapping names to beables")
        for bname, bspec in raw_beables.items():
            beables[bname] = parse_beable(bspec, layout, f"beables.{bname}", name=bname)
        sp = data.get("split")
        if not isinstance(sp, dict) or not isinstance(sp.get("object"), list):
            raise SpecError("split", "expected {'object': [...], 'subject': [...]}")
        for i, l in enumerate(sp["object"]):
            if str(l) not in layout.labels:
                raise SpecError(f"split.object[{i}]", f"unknown subsystem label {l!r}")
        split = initial_split(layout, sp["object"])
        if "subject" in sp and set(map(str, sp["subject"])) != set(split.subject_labels):
            raise SpecError("split.subject", "object and subject must partition the layout labels")
        if sp.get("beable") is not None:
            if sp["beable"] not in beables:
                raise SpecError("split.beable", f"unknown beable {sp['beable']!r}")
            try:
                split = convert_environment_to_subject(split, beables[sp["beable"]])
            except SplitError as exc:
                raise SpecError("split.beable", str(exc)) from None
        sampling = data.get("sampling", {})
        n = sampling.get("n", 10000)
        seed = sampling.get("seed", 0)
        if not isinstance(n, int) or n < 1:
            raise SpecError("sampling.n", "expected a positive integer")
        if not isinstance(seed, int) or not 0 <= seed < 2 ** 64:
            raise SpecError("sampling.seed", "expected a 64-bit unsigned integer")
        steps = data.get("steps", [])
        if not isinstance(steps, list):
            raise SpecError("steps", "expected a list of steps")
        for i, st in enumerate(steps):
            if not isinstance(st, dict) or st.get("op") not in ("shift", "convert", "measure", "witness"):
                raise SpecError(f"steps[{i}].op", "expected one of shift, convert, measure, witness")
        spec = cls(name, layout, state, split, beables, tuple(steps), n, seed, data.get("description", ""))
        spec.check_discussions()
        return spec

    def with_sampling(self, n: int | None = None, seed: int | None = None) -> "ScenarioSpec":
        return replace(self, n=self.n if n is None else n, seed=self.seed if seed is None else seed)

    def check_discussions(self):
        """Reject specs whose split changes inside one discussion.

        Once a discussion has analysed the object, every later step tagged
        with the same discussion must see the identical split.
        """
        split = self.split
        seen: dict[str, tuple] = {}
        for i, st in enumerate(self.steps):
            disc = str(st.get("discussion", "main"))
            try:
                split = _apply_split_step(split, st, self.beables)
            except (SplitError, SpecError) as exc:
                raise ScenarioError(i, str(exc)) from None
            sig = split.signature()
            if st["op"] in ("shift", "convert"):
                if disc in seen:
                    raise ScenarioError(i, f"split changed inside discussion {disc!r}")
                continue
            if disc in seen and seen[disc] != sig:
                raise ScenarioError(i, f"split changed inside discussion {disc!r}")
            seen[disc] = sig


def _apply_split_step(split: Split, st: dict, beables: dict) -> Split:
    if st["op"] == "shift":
        labels = st.get("labels", [])
        return shift_cut(split, [str(l) for l in labels], st.get("direction", TOWARD_OBJECT))
    if st["op"] == "convert":
        name = st.get("beable")
        if name not in beables:
            raise SplitError(f"unknown beable {name!r}")
        return convert_environment_to_subject(split, beables[name], bool(st.get("replace", False)))
    return split


@dataclass
class ScenarioReport:
    name: str
    seed: int
    n: int
    steps: list = field(default_factory=list)
    assertions: list = field(default_factory=list)
    claims: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    @property
    def contradictions(self) -> list[str]:
        kinds: dict[str, set] = {}
        for c in self.claims:
            kinds.setdefault(c["subject"], set()).add(c["kind"])
        return sorted(s for s, k in kinds.items() if {"decoherence", "coherence"} <= k)

    @property
    def passed(self) -> bool:
        return all(a["passed"] for a in self.assertions) and not self.contradictions

    def to_dict(self) -> dict:
        return {
            "kind": "scenario",
            "name": self.name,
            "seed": self.seed,
            "n": self.n,
            "passed": self.passed,
            "steps": self.steps,
            "assertions": self.assertions,
            "claims": self.claims,
            "contradictions": self.contradictions,
            "notes": self.notes,
        }


def _step_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1, np.uint64)[0])


def _observable(spec, layout: SubsystemLayout, labels, path):
    return parse_observable(spec, layout.dim_of(labels), path)


def _conditional_objects(psi: Ket, split: Split):
    """Object state relative to each occurring subject-beable value."""
    obj = split.object_labels
    if split.subject_beable is None:
        return [("unconverted", 1.0, reduced_state(psi, obj))]
    out = []
    b = split.subject_beable
    for i, q in enumerate(b.projectors):
        w = event_probability(psi, q)
        if w <= TOL_BRANCH:
            continue
        _, rho = conditional_subsystem_state(psi, q, obj)
        out.append((b.value_name(i), w, rho))
    return out


def _as_ket_if_pure(rho: DensityOperator):
    if rho.purity < 1 - TOL_ALG:
        return rho
    vals, vecs = np.linalg.eigh(rho.matrix)
    return Ket.normalized(vecs[:, -1], rho.layout)


class _Runner:
    def __init__(self, spec: ScenarioSpec, z_crit: float, threads: int):
        self.spec = spec
        self.z_crit = z_crit
        self.threads = threads
        self.report = ScenarioReport(spec.name, spec.seed, spec.n)

    def verdict(self, step, op, assertion, expected, observed, passed):
        self.report.assertions.append({
            "step": step,
            "op": op,
            "assertion": assertion,
            "expected": expected,
            "observed": observed,
            "passed": bool(passed),
        })

    def run(self) -> ScenarioReport:
        split = self.spec.split
        for i, st in enumerate(self.spec.steps):
            op = st["op"]
            try:
                if op in ("shift", "convert"):
                    new = _apply_split_step(split, st, self.spec.beables)
                    out = {"index": i, "op": op, "split": new.describe(), "subject": new.subject_tag}
                    if split.subject_beable is not None and new.subject_beable is None:
                        note = f"step {i}: subject beable {split.subject_beable.name!r} removed by moving its subsystem to the object"
                        out["note"] = note
                        self.report.notes.append(note)
                    split = new
                elif op == "measure":
                    out = self.measure(i, st, split)
                else:
                    out = self.witness(i, st, split)
            except ScenarioError:
                raise
            except (SplitError, SpecError, StateError, ValueError) as exc:
                raise ScenarioError(i, str(exc)) from None
            out["discussion"] = str(st.get("discussion", "main"))
            self.report.steps.append(out)
        return self.report

    def measure(self, i, st, split: Split) -> dict:
        spec = self.spec
        psi = spec.state
        beable = split.subject_beable
        if beable is None:
            raise ScenarioError(i, "measure needs a subject beable; convert the environment first")
        obj = split.object_labels
        if not obj:
            raise ScenarioError(i, "object side is empty")
        z_crit = float(st.get("z_crit", self.z_crit))
        seed = _step_seed(spec.seed, i)
        rho_obj = reduced_state(psi, obj)
        values = []
        mix = np.zeros_like(rho_obj.matrix)
        conds = []
        for k, q in enumerate(beable.projectors):
            w = event_probability(psi, q)
            entry = {"index": k, "value": beable.value_name(k), "weight": w}
            if w > TOL_BRANCH:
                _, rho = conditional_subsystem_state(psi, q, obj)
                mix += w * rho.matrix
                conds.append(rho)
                entry["conditional_state"] = density_to_json(rho)
                entry["purity"] = rho.purity
            values.append(entry)
        residual = float(np.max(np.abs(mix - rho_obj.matrix)))
        overlap = 0.0
        for a in range(len(conds)):
            for b in range(a + 1, len(conds)):
                overlap = max(overlap, float(np.trace(conds[a].matrix @ conds[b].matrix).real))
        ensemble = build_ensemble(psi, beable, spec.n, seed, self.threads)
        freq = frequency_report(ensemble, z_crit)
        out = {
            "index": i,
            "op": "measure",
            "split": split.describe(),
            "object": list(obj),
            "subject": split.subject_tag,
            "seed": seed,
            "values": values,
            "object_state": density_to_json(rho_obj),
            "decomposition_residual": residual,
            "max_conditional_overlap": overlap,
            "frequencies": freq.to_dict(),
        }
        theorem = None
        if st.get("observable") is not None:
            c1 = _observable(st["observable"], psi.layout, obj, f"steps[{i}].observable")
            theorem = verify_conditional_state_theorem(psi, beable, c1, spec.n, seed, z_crit, keep=obj,
                                                       threads=self.threads, ensemble=ensemble)
            out["theorem"] = theorem.to_dict()
        if len(conds) >= 2 and residual <= TOL_ALG:
            self.report.claims.append({"step": i, "kind": "decoherence", "subject": split.subject_tag,
                                       "object": list(obj)})
        checks = st.get("assert", {})
        if "weights" in checks:
            tol = float(checks.get("weights_tol", TOL_ALG))
            got = [v["weight"] for v in values]
            exp = checks["weights"]
            ok = len(exp) == len(got) and all(abs(a - b) <= tol for a, b in zip(exp, got))
            self.verdict(i, "measure", "weights", exp, got, ok)
        if checks.get("decomposition"):
            self.verdict(i, "measure", "decomposition", f"<= {TOL_ALG}", residual, residual <= TOL_ALG)
        if checks.get("definite"):
            self.verdict(i, "measure", "definite", f"<= {TOL_ALG}", overlap, overlap <= TOL_ALG)
        if "frequencies" in checks:
            self.verdict(i, "measure", "frequencies", bool(checks["frequencies"]), freq.passed,
                         freq.passed == bool(checks["frequencies"]))
        if "theorem" in checks:
            if theorem is None:
                raise ScenarioError(i, "theorem assertion needs an observable")
            self.verdict(i, "measure", "theorem", bool(checks["theorem"]), theorem.passed,
                         theorem.passed == bool(checks["theorem"]))
        return out

    def witness(self, i, st, split: Split) -> dict:
        spec = self.spec
        tested_name = st.get("beable")
        if tested_name not in spec.beables:
            raise ScenarioError(i, f"unknown beable {tested_name!r}")
        tested: BeableObservable = spec.beables[tested_name]
        obj = split.object_labels
        if not set(tested.subsystems) < set(obj):
            raise ScenarioError(i, "tested beable must act on a proper part of the object")
        p1_labels = st.get("p1_subsystems")
        if p1_labels is not None:
            p1_labels = [str(l) for l in p1_labels]
        seed = _step_seed(spec.seed, i)
        opt = st.get("optimize", {})
        fixed = st.get("projectors")
        certify = st.get("certify")
        rows = []
        for value, w, rho in _conditional_objects(spec.state, split):
            state = _as_ket_if_pure(rho)
            row = {"subject_value": value, "weight": w, "pure": isinstance(state, Ket)}
            if fixed is not None:
                p1 = parse_projector(fixed["p1"], rho.layout, f"steps[{i}].projectors.p1")
                p2 = parse_projector(fixed["p2"], rho.layout, f"steps[{i}].projectors.p2")
                signed = interference_term(state, tested, p1, p2)
                row.update(gap=abs(signed), signed_gap=signed)
            else:
                res = optimize_witness(state, tested, int(opt.get("restarts", 8)), int(opt.get("steps", 200)),
                                       seed, p1_labels, self.threads)
                row.update(res.to_dict())
                row.pop("kind")
            if certify is not None:
                row["certificate"] = grid_certificate(state, tested, int(certify.get("resolution", 64)), p1_labels)
            rows.append(row)
        gaps = [r["gap"] for r in rows]
        out = {
            "index": i,
            "op": "witness",
            "split": split.describe(),
            "object": list(obj),
            "subject": split.subject_tag,
            "tested_beable": tested_name,
            "seed": seed,
            "results": rows,
        }
        if max(gaps) > TOL_ALG:
            self.report.claims.append({"step": i, "kind": "coherence", "subject": split.subject_tag,
                                       "object": list(obj)})
        checks = st.get("assert", {})
        if "gap_min" in checks:
            self.verdict(i, "witness", "gap_min", checks["gap_min"], min(gaps), min(gaps) >= checks["gap_min"])
        if "gap_max" in checks:
            self.verdict(i, "witness", "gap_max", checks["gap_max"], max(gaps), max(gaps) <= checks["gap_max"])
        if "certificate_min" in checks:
            certs = [r.get("certificate") for r in rows]
            if any(c is None for c in certs):
                raise ScenarioError(i, "certificate assertion needs 'certify'")
            self.verdict(i, "witness", "certificate_min", checks["certificate_min"], min(certs),
                         min(certs) >= checks["certificate_min"])
        return out


def run_scenario(spec: ScenarioSpec, z_crit: float = Z_CRIT, threads: int = 1) -> ScenarioReport:
    """Execute the steps of ``spec`` in order; deterministic given its seed."""
    runner = _Runner(spec, z_crit, threads)
    report = runner.run()
    report.assertions.append({
        "step": None,
        "op": "scenario",
        "assertion": "no_same_subject_contradiction",
        "expected": [],
        "observed": report.contradictions,
        "passed": not report.contradictions,
    })
    return report


def builtin_spec_data(name: str) -> dict:
    if name not in BUILTIN_SCENARIOS:
        raise KeyError(name)
    text = resources.files("reldec.scenarios").joinpath(f"{name}.json").read_text()
    return json.loads(text)


def resolve_scenario(name: str) -> ScenarioSpec:
    """Built-in scenario by name, else ``<name>.json`` in ``$RELDEC_SCENARIO_DIR``."""
    if name in BUILTIN_SCENARIOS:
        return ScenarioSpec.from_dict(builtin_spec_data(name), name)
    for d in os.environ.get(SCENARIO_DIR_ENV, "").split(os.pathsep):
        if not d:
            continue
        p = Path(d) / f"{name}.json"
        if p.is_file():
            return ScenarioSpec.from_dict(load_json(p), str(p))
    raise KeyError(name)


def load_scenario(path) -> ScenarioSpec:
    return ScenarioSpec.from_dict(load_json(path), str(path))
