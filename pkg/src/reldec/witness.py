"""Search for product projector pairs that expose coherence between branches.

The interference term of a pair ``(P1, P2)`` is the difference between its
coincidence probability in the coherent state and in the decohered one.
:func:`optimize_witness` hill-climbs over rank-1 pairs; :func:`grid_certificate`
gives an independent lower bound from an exhaustive parameter grid.
"""
from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .qstate import (
    TOL_ALG,
    BeableObservable,
    DensityOperator,
    Ket,
    Projector,
    StateError,
    branch_decompose,
    decohered_mixture,
    interference_term,
    luders_decohere,
)
from .rng import CounterStream

NO_COHERENCE = "no coherence to witness"


@dataclass(frozen=True, eq=False)
class WitnessResult:
    p1: Projector | None
    p2: Projector | None
    gap: float
    iterations: int
    certificate: float | None = None
    note: str | None = None
    signed_gap: float = 0.0

    def to_dict(self) -> dict:
        from .serialization import projector_to_json

        return {
            "kind": "witness",
            "gap": self.gap,
            "signed_gap": self.signed_gap,
            "iterations": self.iterations,
            "certificate": self.certificate,
            "note": self.note,
            "p1": projector_to_json(self.p1) if self.p1 is not None else None,
            "p2": projector_to_json(self.p2) if self.p2 is not None else None,
        }


def _sides(state, beable: BeableObservable, p1_labels):
    layout = state.layout
    b_labels = layout.ordered(beable.subsystems)
    if p1_labels is None:
        p1_labels = layout.complement(b_labels)
    a_labels = layout.ordered(p1_labels)
    if not a_labels or set(a_labels) & set(b_labels):
        raise StateError("P1 subsystems must be non-empty and disjoint from the beable's")
    return a_labels, tuple(beable.subsystems)


def _difference_tensor(state, beable: BeableObservable, a_labels, b_labels):
    """``rho - decohered(rho)`` restricted to A+B, shaped ``(dA, dB, dA, dB)``.

    Returns ``None`` when there is only one occurring branch.
    """
    layout = state.layout
    if isinstance(state, Ket):
        branches = branch_decompose(state, beable)
        if len(branches) < 2:
            return None
        rho = state.to_density().matrix
        mixed = decohered_mixture(branches).matrix
    else:
        rho = state.matrix
        mixed = luders_decohere(state, beable).matrix
    delta = rho - mixed
    if np.max(np.abs(delta)) <= TOL_ALG:
        return None
    n = len(layout.dims)
    a_idx = [layout.index(l) for l in a_labels]
    b_idx = [layout.index(l) for l in b_labels]
    r_idx = [i for i in range(n) if i not in a_idx + b_idx]
    t = delta.reshape(layout.dims + layout.dims)
    perm = a_idx + b_idx + r_idx
    t = np.transpose(t, perm + [n + i for i in perm])
    da, db = layout.dim_of(a_labels), layout.dim_of(b_labels)
    dr = layout.dim // (da * db)
    t = t.reshape(da * db, dr, da * db, dr)
    t = np.einsum("arbr->ab", t)
    return t.reshape(da, db, da, db)


def _gap(delta, a, b) -> float:
    return float(np.einsum("i,j,ijkl,k,l->", a.conj(), b.conj(), delta, a, b).real)


def _unpack(x, da, db):
    a = x[:da] + 1j * x[da:2 * da]
    b = x[2 * da:2 * da + db] + 1j * x[2 * da + db:]
    return a / np.linalg.norm(a), b / np.linalg.norm(b)


def _climb(delta, x, steps, step0=0.5, eps=1e-6):
    da, db = delta.shape[0], delta.shape[1]

    def f(v):
        return abs(_gap(delta, *_unpack(v, da, db)))

    fx = f(x)
    h = step0
    used = 0
    for used in range(1, steps + 1):
        grad = np.empty_like(x)
        for k in range(x.size):
            e = np.zeros_like(x)
            e[k] = eps
            grad[k] = (f(x + e) - f(x - e)) / (2 * eps)
        gn = np.linalg.norm(grad)
        if gn == 0:
            break
        cand = x + h * grad / gn
        a, b = _unpack(cand, da, db)
        cand = np.concatenate([a.real, a.imag, b.real, b.imag])
        fc = f(cand)
        if fc > fx:
            x, fx = cand, fc
        else:
            h *= 0.5
            if h < 1e-9:
                break
    return fx, x, used


def optimize_witness(state, beable: BeableObservable, restarts: int = 8, steps: int = 200,
                     seed: int = 0, p1_labels=None, threads: int = 1) -> WitnessResult:
    """Best ``|interference term|`` over rank-1 pairs found by restarted ascent.

    Restart ``r`` always draws its starting point from counter block ``r``
    of the seed's stream, so adding restarts never lowers the result. Ties
    go to the lowest restart index.
    """
    a_labels, b_labels = _sides(state, beable, p1_labels)
    delta = _difference_tensor(state, beable, a_labels, b_labels)
    if delta is None:
        return WitnessResult(None, None, 0.0, 0, note=NO_COHERENCE)
    da, db = delta.shape[0], delta.shape[1]
    stream = CounterStream(seed, "witness")

    def run(r):
        x0 = stream.generator(r).normal(size=2 * (da + db))
        return _climb(delta, x0, steps)

    if threads > 1 and restarts > 1:
        with ThreadPoolExecutor(max_workers=min(threads, restarts)) as pool:
            results = list(pool.map(run, range(restarts)))
    else:
        results = [run(r) for r in range(restarts)]
    best = 0
    for r in range(1, restarts):
        if results[r][0] > results[best][0]:
            best = r
    _, x, _ = results[best]
    iterations = sum(res[2] for res in results)
    a, b = _unpack(x, da, db)
    p1 = Projector(np.outer(a, a.conj()), a_labels)
    p2 = Projector(np.outer(b, b.conj()), b_labels)
    signed = interference_term(state, beable, p1, p2)
    return WitnessResult(p1, p2, abs(signed), iterations, signed_gap=signed)


def grid_vectors(dim: int, resolution: int) -> np.ndarray:
    """Unit vectors (up to global phase) on a hyperspherical angle grid.

    Magnitude angles run over ``[0, pi/2]`` with ``resolution`` points each
    and relative phases over ``2 pi k / resolution``; the first component is
    kept real and non-negative.
    """
    thetas = np.linspace(0.0, np.pi / 2, resolution)
    phis = 2 * np.pi * np.arange(resolution) / resolution
    grids = np.meshgrid(*([thetas] * (dim - 1) + [phis] * (dim - 1)), indexing="ij")
    ang = np.stack([g.reshape(-1) for g in grids], axis=1)
    th, ph = ang[:, : dim - 1], ang[:, dim - 1:]
    out = np.empty((ang.shape[0], dim), dtype=complex)
    sin_prod = np.ones(ang.shape[0])
    for k in range(dim - 1):
        out[:, k] = sin_prod * np.cos(th[:, k])
        sin_prod = sin_prod * np.sin(th[:, k])
    out[:, dim - 1] = sin_prod
    out[:, 1:] *= np.exp(1j * ph)
    return out


def grid_certificate(state, beable: BeableObservable, resolution: int = 64, p1_labels=None,
                     max_points: int = 2 ** 22, chunk: int = 2 ** 15) -> float:
    """Lower bound on the best ``|interference term|`` over rank-1 pairs.

    One side's vector runs over :func:`grid_vectors`; for each grid vector
    the other side is maximized exactly by the largest-magnitude eigenvalue
    of the induced Hermitian form.
    """
    a_labels, b_labels = _sides(state, beable, p1_labels)
    layout = state.layout
    da, db = layout.dim_of(a_labels), layout.dim_of(b_labels)
    if da > 4 or db > 4:
        raise ValueError(f"grid oracle needs both sides of dimension <= 4, got {da} and {db}")
    delta = _difference_tensor(state, beable, a_labels, b_labels)
    if delta is None:
        return 0.0
    if da > db:
        delta = delta.transpose(1, 0, 3, 2)
        da, db = db, da
    npts = resolution ** (2 * (da - 1))
    if npts > max_points:
        raise ValueError(f"grid of {npts} points exceeds the limit of {max_points}; lower the resolution")
    vecs = grid_vectors(da, resolution)
    best = 0.0
    for start in range(0, vecs.shape[0], chunk):
        v = vecs[start:start + chunk]
        forms = np.einsum("ni,ijkl,nk->njl", v.conj(), delta, v)
        forms = (forms + forms.conj().transpose(0, 2, 1)) / 2
        ev = np.linalg.eigvalsh(forms)
        best = max(best, float(np.abs(ev).max()))
    return best
