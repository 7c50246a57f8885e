"""Monte-Carlo ensembles of individual systems carrying definite beable values.

Every member of an :class:`Ensemble` is tagged with one beable value, drawn
with the Born weight of the corresponding projector. Members sharing a tag
form a subensemble. Such a subensemble has no quantum state of its own; only
its restriction to the remaining subsystems is described by the conditional
state, and :func:`verify_conditional_state_theorem` checks that claim by
simulated measurement.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple

import numpy as np

from . import oracle
from .qstate import (
    TOL_ALG,
    TOL_BRANCH,
    BeableObservable,
    Ket,
    StateError,
    conditional_subsystem_state,
    event_probability,
)
from .rng import CounterStream, map_chunks

Z_CRIT = 3.0

TAG_STREAM = "beable-tags"
MEASURE_STREAM = "measurement"


@dataclass(frozen=True)
class IndividualSystem:
    beable_value: int
    recorded_results: tuple[tuple[str, float], ...] = ()


def beable_weights(state, beable: BeableObservable) -> np.ndarray:
    """Born weights of every beable value (normalized to sum exactly to 1)."""
    w = np.array([event_probability(state, q) for q in beable.projectors])
    if abs(w.sum() - 1.0) > 1e-8:
        raise StateError(f"beable weights sum to {w.sum()!r}; state is not normalized")
    return w / w.sum()


def _inverse_cdf(weights: np.ndarray, u: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(weights)
    idx = np.searchsorted(cdf, u, side="right")
    # round-off in the last cumulative value must not produce an out-of-range index;
    # fall back to the last value that actually has weight
    last = int(np.flatnonzero(weights > 0)[-1])
    return np.minimum(idx, last)


def sample_beable_value(state, beable: BeableObservable, rng: np.random.Generator, size: int | None = None):
    """Draw a beable value with probability ``Tr(rho Q_i)``.

    With ``size`` given, returns an array of that many independent draws.
    """
    u = rng.random(1 if size is None else size)
    idx = _inverse_cdf(beable_weights(state, beable), u)
    return int(idx[0]) if size is None else idx


@dataclass(frozen=True, eq=False)
class Ensemble:
    state: Ket
    beable: BeableObservable
    values: np.ndarray
    seed: int

    @property
    def n(self) -> int:
        return int(self.values.size)

    @property
    def members(self) -> list[IndividualSystem]:
        return [IndividualSystem(int(v)) for v in self.values]

    def counts(self) -> np.ndarray:
        return np.bincount(self.values, minlength=len(self.beable))

    def subensemble(self, value_index: int) -> np.ndarray:
        """Member indices carrying ``value_index``."""
        return np.flatnonzero(self.values == value_index)


def build_ensemble(psi: Ket, beable: BeableObservable, n: int, seed: int, threads: int = 1) -> Ensemble:
    if n < 1:
        raise ValueError("ensemble size must be at least 1")
    weights = beable_weights(psi, beable)
    stream = CounterStream(seed, TAG_STREAM)
    values = map_chunks(lambda s, c: _inverse_cdf(weights, stream.uniforms(s, c)), n, threads)
    values = values.astype(np.int64)
    values.setflags(write=False)
    return Ensemble(psi, beable, values, int(seed))


@dataclass(frozen=True)
class FrequencyEntry:
    index: int
    name: str
    count: int
    frequency: Fraction
    weight: float
    z: float


@dataclass(frozen=True)
class ConvergenceReport:
    n: int
    z_crit: float
    entries: tuple[FrequencyEntry, ...]

    @property
    def passed(self) -> bool:
        return all(abs(e.z) <= self.z_crit for e in self.entries)

    def to_dict(self) -> dict:
        return {
            "kind": "frequencies",
            "n": self.n,
            "z_crit": self.z_crit,
            "passed": self.passed,
            "entries": [
                {
                    "index": e.index,
                    "value": e.name,
                    "count": e.count,
                    "frequency": float(e.frequency),
                    "weight": e.weight,
                    "z": e.z,
                }
                for e in self.entries
            ],
        }


def _z_score(count: int, n: int, w: float) -> float:
    f = count / n
    var = w * (1.0 - w)
    if var <= TOL_BRANCH:
        # degenerate binomial: the frequency is forced
        return 0.0 if abs(f - w) <= TOL_ALG else math.copysign(1e300, f - w)
    return (f - w) / math.sqrt(var / n)


def frequency_report_from_counts(counts, weights, z_crit: float = Z_CRIT, names=None) -> ConvergenceReport:
    counts = [int(c) for c in counts]
    n = sum(counts)
    if n < 1:
        raise ValueError("no members to report on")
    entries = tuple(
        FrequencyEntry(
            i,
            names[i] if names else str(i),
            c,
            Fraction(c, n),
            float(w),
            _z_score(c, n, float(w)),
        )
        for i, (c, w) in enumerate(zip(counts, weights))
    )
    return ConvergenceReport(n, float(z_crit), entries)


def frequency_report(ensemble: Ensemble, z_crit: float = Z_CRIT) -> ConvergenceReport:
    """Compare empirical value frequencies with the Born weights."""
    beable = ensemble.beable
    return frequency_report_from_counts(
        ensemble.counts(),
        beable_weights(ensemble.state, beable),
        z_crit,
        [beable.value_name(i) for i in range(len(beable))],
    )


def eigen_outcomes(c: np.ndarray, tol: float = 1e-9):
    """Distinct eigenvalues of Hermitian ``c`` and their eigenprojectors."""
    c = np.asarray(c, dtype=complex)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise StateError("observable must be a square matrix")
    if np.max(np.abs(c - c.conj().T)) > TOL_ALG:
        raise StateError("observable is not Hermitian")
    vals, vecs = np.linalg.eigh(c)
    groups: list[list[int]] = []
    for i, v in enumerate(vals):
        if groups and abs(v - vals[groups[-1][0]]) <= tol:
            groups[-1].append(i)
        else:
            groups.append([i])
    eigvals = np.array([vals[g].mean() for g in groups])
    projs = [vecs[:, g] @ vecs[:, g].conj().T for g in groups]
    return eigvals, projs


def _observable_labels(ensemble: Ensemble, keep):
    layout = ensemble.state.layout
    if keep is None:
        keep = layout.complement(ensemble.beable.subsystems)
    return layout.ordered(keep)


class SubensembleAverage(NamedTuple):
    mean: float
    stderr: float
    count: int


def simulate_measurements(ensemble: Ensemble, value_index: int, c1, stream: CounterStream | None = None,
                          keep=None, threads: int = 1) -> np.ndarray:
    """Outcomes of an ideal measurement of ``c1`` on every member of subensemble ``value_index``.

    Each member's outcome is drawn from the conditional state of ``keep``
    with its own counter block, so the record is independent of ``threads``.
    The beable tag is left unchanged by the measurement.
    """
    keep = _observable_labels(ensemble, keep)
    members = ensemble.subensemble(value_index)
    if members.size == 0:
        raise ValueError(f"subensemble for beable value {value_index} is empty")
    c1 = np.asarray(c1, dtype=complex)
    layout = ensemble.state.layout
    if c1.shape[0] != layout.dim_of(keep):
        raise StateError(f"observable dimension {c1.shape[0]} does not match subsystems {keep}")
    _, rho = conditional_subsystem_state(ensemble.state, ensemble.beable.projectors[value_index], keep)
    eigvals, projs = eigen_outcomes(c1)
    probs = np.clip([np.trace(rho.matrix @ p).real for p in projs], 0.0, None)
    probs = probs / probs.sum()
    if stream is None:
        stream = CounterStream(ensemble.seed, MEASURE_STREAM)
    u = map_chunks(lambda s, c: stream.uniforms(s, c), ensemble.n, threads)[members]
    return eigvals[_inverse_cdf(probs, u)]


def subensemble_average(ensemble: Ensemble, value_index: int, c1, stream: CounterStream | None = None,
                        keep=None, threads: int = 1) -> SubensembleAverage:
    outcomes = simulate_measurements(ensemble, value_index, c1, stream, keep, threads)
    n = outcomes.size
    mean = float(outcomes.mean())
    stderr = float(outcomes.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return SubensembleAverage(mean, stderr, n)


@dataclass(frozen=True)
class TheoremEntry:
    index: int
    name: str
    weight: float
    count: int
    mean: float | None = None
    stderr: float | None = None
    theory: float | None = None
    theory_oracle: float | None = None
    passed: bool | None = None
    note: str | None = None


@dataclass(frozen=True)
class TheoremReport:
    n: int
    seed: int
    z_crit: float
    entries: tuple[TheoremEntry, ...]
    notes: tuple[str, ...] = field(default=())

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries if e.passed is not None)

    def to_dict(self) -> dict:
        return {
            "kind": "theorem",
            "n": self.n,
            "seed": self.seed,
            "z_crit": self.z_crit,
            "passed": self.passed,
            "notes": list(self.notes),
            "entries": [
                {
                    "index": e.index,
                    "value": e.name,
                    "weight": e.weight,
                    "count": e.count,
                    "mean": e.mean,
                    "stderr": e.stderr,
                    "theory": e.theory,
                    "theory_oracle": e.theory_oracle,
                    "passed": e.passed,
                    "note": e.note,
                }
                for e in self.entries
            ],
        }


def verify_conditional_state_theorem(psi: Ket, beable: BeableObservable, c1, n: int, seed: int,
                                     z_crit: float = Z_CRIT, keep=None, threads: int = 1,
                                     ensemble: Ensemble | None = None) -> TheoremReport:
    """Check subensemble averages of ``c1`` against ``Tr(c1 rho_i)``.

    For each beable value the Monte-Carlo mean over the subensemble must lie
    within ``z_crit`` standard errors of the conditional-state prediction.
    The prediction is also recomputed by the brute-force oracle when the
    total dimension allows, and the two must agree to ``TOL_ALG``.
    Values with negligible weight or an empty subensemble are skipped with
    a note.
    """
    if ensemble is None:
        ensemble = build_ensemble(psi, beable, n, seed, threads)
    layout = psi.layout
    keep = _observable_labels(ensemble, keep)
    c1 = np.asarray(c1, dtype=complex)
    counts = ensemble.counts()
    use_oracle = layout.dim <= oracle.ORACLE_MAX_DIM
    q_pos = [layout.index(l) for l in beable.subsystems]
    c_pos = [layout.index(l) for l in keep]
    entries = []
    notes = ["beable tags are left unchanged by the simulated measurements"]
    for i, q in enumerate(beable.projectors):
        name = beable.value_name(i)
        w = event_probability(psi, q)
        if w <= TOL_BRANCH:
            entries.append(TheoremEntry(i, name, w, int(counts[i]), note="skipped: beable value has zero weight"))
            continue
        if counts[i] == 0:
            entries.append(TheoremEntry(i, name, w, 0, note="skipped: empty subensemble"))
            continue
        _, rho = conditional_subsystem_state(psi, q, keep)
        theory = float(np.trace(c1 @ rho.matrix).real)
        theory_oracle = None
        if use_oracle:
            theory_oracle = oracle.conditional_expectation(psi.amplitudes, layout.dims, c1, c_pos, q.matrix, q_pos)
        mean, stderr, count = subensemble_average(ensemble, i, c1, keep=keep, threads=threads)
        ok = abs(mean - theory) <= z_crit * stderr + TOL_ALG
        note = None
        if theory_oracle is not None and abs(theory - theory_oracle) > TOL_ALG:
            ok = False
            note = "theory and oracle disagree"
        entries.append(TheoremEntry(i, name, w, count, mean, stderr, theory, theory_oracle, bool(ok), note))
    if all(e.passed is None for e in entries):
        raise ValueError(f"no beable value has a non-empty subensemble at n={ensemble.n}")
    return TheoremReport(ensemble.n, ensemble.seed, float(z_crit), tuple(entries), tuple(notes))
