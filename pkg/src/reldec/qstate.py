"""Dense state algebra for composite quantum systems.

States live on a tensor-factored Hilbert space described by a
:class:`SubsystemLayout`. Everything here is exact up to floating point:
branch decompositions relative to a beable, decohered mixtures, partial
traces, conditional subsystem states, Lüders conditioning, coincidence
probabilities and the interference term that distinguishes a coherent
state from its decohered counterpart.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np

TOL_ALG = 1e-10
TOL_BRANCH = 1e-12
MAX_DIM = 4096

__all__ = [
    "TOL_ALG",
    "TOL_BRANCH",
    "MAX_DIM",
    "StateError",
    "ImpossibleConditionError",
    "SubsystemLayout",
    "Ket",
    "DensityOperator",
    "Projector",
    "BeableObservable",
    "Branch",
    "basis_ket",
    "tensor_product",
    "apply_operator",
    "expectation",
    "event_probability",
    "branch_decompose",
    "decohered_mixture",
    "luders_decohere",
    "partial_trace",
    "reduced_state",
    "conditional_subsystem_state",
    "luders_conditioning",
    "coincidence_probability",
    "interference_term",
    "interference_cross_terms",
    "everett_relative_state",
]


class StateError(ValueError):
    """Invalid state, operator or layout."""


class ImpossibleConditionError(StateError):
    """Conditioning on an event whose probability is below ``TOL_BRANCH``."""


def _frozen(a):
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


def _as_labels(labels) -> tuple[str, ...]:
    if isinstance(labels, str):
        return (labels,)
    return tuple(str(l) for l in labels)


@dataclass(frozen=True)
class SubsystemLayout:
    """Ordered tensor factors with their dimensions and names."""

    dims: tuple[int, ...]
    labels: tuple[str, ...]

    def __init__(self, dims: Sequence[int], labels: Sequence[str] | None = None):
        dims = tuple(int(d) for d in dims)
        if labels is None:
            labels = tuple(str(i + 1) for i in range(len(dims)))
        labels = _as_labels(labels)
        if not dims:
            raise StateError("layout needs at least one subsystem")
        if len(dims) != len(labels):
            raise StateError(f"{len(dims)} dims but {len(labels)} labels")
        if any(d < 2 for d in dims):
            raise StateError(f"subsystem dimensions must be >= 2, got {dims}")
        if len(set(labels)) != len(labels):
            raise StateError(f"duplicate subsystem labels in {labels}")
        total = int(np.prod(dims))
        if total > MAX_DIM:
            raise StateError(f"total dimension {total} exceeds the cap of {MAX_DIM}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "labels", labels)

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims))

    def index(self, label: str) -> int:
        try:
            return self.labels.index(str(label))
        except ValueError:
            raise StateError(f"unknown subsystem label {label!r}; layout has {self.labels}") from None

    def dim_of(self, labels) -> int:
        return int(np.prod([self.dims[self.index(l)] for l in _as_labels(labels)]))

    def ordered(self, labels) -> tuple[str, ...]:
        """Return ``labels`` sorted into layout order (validating each)."""
        labels = set(_as_labels(labels))
        for l in labels:
            self.index(l)
        return tuple(l for l in self.labels if l in labels)

    def complement(self, labels) -> tuple[str, ...]:
        labels = set(_as_labels(labels))
        return tuple(l for l in self.labels if l not in labels)

    def sub(self, labels) -> "SubsystemLayout":
        labels = self.ordered(labels)
        return SubsystemLayout([self.dims[self.index(l)] for l in labels], labels)

    def __add__(self, other: "SubsystemLayout") -> "SubsystemLayout":
        return SubsystemLayout(self.dims + other.dims, self.labels + other.labels)


def _layout_from(dims_or_layout, labels=None) -> SubsystemLayout:
    if isinstance(dims_or_layout, SubsystemLayout):
        return dims_or_layout
    return SubsystemLayout(dims_or_layout, labels)


@dataclass(frozen=True, eq=False)
class Ket:
    """Normalized state vector on a layout."""

    amplitudes: np.ndarray
    layout: SubsystemLayout

    def __init__(self, amplitudes, layout, labels=None, *, tol: float = TOL_ALG):
        layout = _layout_from(layout, labels)
        amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
        if amps.size != layout.dim:
            raise StateError(f"ket has {amps.size} amplitudes, layout dimension is {layout.dim}")
        norm2 = float(np.vdot(amps, amps).real)
        if abs(norm2 - 1.0) > tol:
            raise StateError(f"ket is not normalized (squared norm {norm2!r})")
        object.__setattr__(self, "amplitudes", _frozen(amps))
        object.__setattr__(self, "layout", layout)

    @classmethod
    def normalized(cls, amplitudes, layout, labels=None) -> "Ket":
        amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
        n = np.linalg.norm(amps)
        if n == 0:
            raise StateError("cannot normalize the zero vector")
        return cls(amps / n, layout, labels)

    @property
    def dim(self) -> int:
        return self.layout.dim

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape(self.layout.dims)

    def to_density(self) -> "DensityOperator":
        return DensityOperator(np.outer(self.amplitudes, self.amplitudes.conj()), self.layout)

    def __repr__(self):
        return f"Ket(dims={self.layout.dims}, labels={self.layout.labels})"


@dataclass(frozen=True, eq=False)
class DensityOperator:
    """Hermitian, positive semidefinite, unit-trace matrix on a layout.

    ``normalize=False`` skips the unit-trace check, which is how an
    unnormalized sum of weighted branch projectors is represented.
    """

    matrix: np.ndarray
    layout: SubsystemLayout

    def __init__(self, matrix, layout, labels=None, *, tol: float = TOL_ALG, unit_trace: bool = True):
        layout = _layout_from(layout, labels)
        m = np.asarray(matrix, dtype=complex)
        if m.shape != (layout.dim, layout.dim):
            raise StateError(f"matrix shape {m.shape} does not match layout dimension {layout.dim}")
        if np.max(np.abs(m - m.conj().T), initial=0.0) > tol:
            raise StateError("density operator is not Hermitian")
        tr = np.trace(m).real
        if unit_trace and abs(tr - 1.0) > tol:
            raise StateError(f"density operator trace is {tr!r}, expected 1")
        m = (m + m.conj().T) / 2
        if np.linalg.eigvalsh(m)[0] < -tol:
            raise StateError("density operator is not positive semidefinite")
        object.__setattr__(self, "matrix", _frozen(m))
        object.__setattr__(self, "layout", layout)

    @property
    def dim(self) -> int:
        return self.layout.dim

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    @property
    def purity(self) -> float:
        return float(np.vdot(self.matrix, self.matrix).real)

    def __repr__(self):
        return f"DensityOperator(dims={self.layout.dims}, labels={self.layout.labels})"


State = Union[Ket, DensityOperator]


@dataclass(frozen=True, eq=False)
class Projector:
    """Orthogonal projector acting on a group of subsystems.

    ``subsystems`` lists the tensor factors the matrix acts on, in the order
    its rows are indexed by; the special value ``"whole"`` means the full
    layout of whatever state it is applied to.
    """

    matrix: np.ndarray
    subsystems: tuple[str, ...] | str

    def __init__(self, matrix, subsystems, *, tol: float = TOL_ALG):
        m = np.asarray(matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise StateError(f"projector must be a square matrix, got shape {m.shape}")
        if np.max(np.abs(m - m.conj().T)) > tol:
            raise StateError("projector is not Hermitian")
        if np.max(np.abs(m @ m - m)) > tol:
            raise StateError("projector is not idempotent")
        subs = "whole" if subsystems == "whole" else _as_labels(subsystems)
        object.__setattr__(self, "matrix", _frozen(m))
        object.__setattr__(self, "subsystems", subs)

    @classmethod
    def onto(cls, vectors, subsystems) -> "Projector":
        """Projector onto the span of ``vectors`` (orthonormalized first)."""
        v = np.atleast_2d(np.asarray(vectors, dtype=complex))
        u, s, _ = np.linalg.svd(v.T, full_matrices=False)
        if s.size == 0 or s[-1] < 1e-8 * max(s[0], 1.0):
            raise StateError("projector vectors are linearly dependent or zero")
        return cls(u @ u.conj().T, subsystems)

    @classmethod
    def basis(cls, dim: int, indices: Iterable[int], subsystems) -> "Projector":
        """Diagonal projector onto computational basis states ``indices``."""
        d = np.zeros(dim)
        d[list(indices)] = 1.0
        return cls(np.diag(d), subsystems)

    @property
    def rank(self) -> int:
        return int(round(np.trace(self.matrix).real))

    def labels_in(self, layout: SubsystemLayout) -> tuple[str, ...]:
        if self.subsystems == "whole":
            return layout.labels
        return self.subsystems

    def check_fits(self, layout: SubsystemLayout) -> tuple[str, ...]:
        labels = self.labels_in(layout)
        d = layout.dim_of(labels)
        if d != self.matrix.shape[0]:
            raise StateError(
                f"projector on {labels} has dimension {self.matrix.shape[0]}, subsystems have {d}"
            )
        return labels


@dataclass(frozen=True, eq=False)
class BeableObservable:
    """Complete family of mutually orthogonal projectors on one subsystem group.

    The index into ``projectors`` is the beable value.
    """

    subsystems: tuple[str, ...]
    projectors: tuple[Projector, ...]
    value_names: tuple[str, ...] | None = None
    name: str | None = None

    def __init__(self, subsystems, projectors, value_names=None, name=None, *, tol: float = TOL_ALG):
        subsystems = _as_labels(subsystems)
        projectors = tuple(
            p if isinstance(p, Projector) else Projector(p, subsystems) for p in projectors
        )
        if len(projectors) < 2:
            raise StateError("a beable needs at least two projectors")
        dims = {p.matrix.shape[0] for p in projectors}
        if len(dims) != 1:
            raise StateError("beable projectors have inconsistent dimensions")
        for p in projectors:
            if p.subsystems != subsystems:
                raise StateError(f"projector on {p.subsystems} attached to beable on {subsystems}")
        (d,) = dims
        total = sum(p.matrix for p in projectors)
        if np.max(np.abs(total - np.eye(d))) > tol:
            raise StateError("beable projectors do not sum to the identity")
        for i, p in enumerate(projectors):
            for q in projectors[i + 1:]:
                if np.max(np.abs(p.matrix @ q.matrix)) > tol:
                    raise StateError("beable projectors are not mutually orthogonal")
        if value_names is not None:
            value_names = tuple(str(v) for v in value_names)
            if len(value_names) != len(projectors):
                raise StateError("value_names length does not match number of projectors")
        object.__setattr__(self, "subsystems", subsystems)
        object.__setattr__(self, "projectors", projectors)
        object.__setattr__(self, "value_names", value_names)
        object.__setattr__(self, "name", name)

    @classmethod
    def computational(cls, subsystems, dim: int, partition=None, value_names=None, name=None):
        """Beable diagonal in the computational basis.

        ``partition`` groups basis indices into values; default is one value
        per basis state.
        """
        if partition is None:
            partition = [[i] for i in range(dim)]
        return cls(
            subsystems,
            [Projector.basis(dim, part, subsystems) for part in partition],
            value_names,
            name,
        )

    def __len__(self):
        return len(self.projectors)

    def value_name(self, i: int) -> str:
        return self.value_names[i] if self.value_names else str(i)


@dataclass(frozen=True)
class Branch:
    weight: float
    ket: Ket
    value_index: int


def basis_ket(layout, index, labels=None) -> Ket:
    """Computational basis state; ``index`` is a flat index or a per-factor tuple."""
    layout = _layout_from(layout, labels)
    if not isinstance(index, (int, np.integer)):
        index = int(np.ravel_multi_index(tuple(index), layout.dims))
    amps = np.zeros(layout.dim, dtype=complex)
    amps[index] = 1.0
    return Ket(amps, layout)


def tensor_product(a: Ket, b: Ket) -> Ket:
    """Kronecker product; the layout is ``a``'s followed by ``b``'s."""
    return Ket(np.kron(a.amplitudes, b.amplitudes), a.layout + b.layout)


def apply_operator(op: np.ndarray, labels, array: np.ndarray, layout: SubsystemLayout) -> np.ndarray:
    """Apply ``op`` (acting on ``labels``) to the row index of ``array``.

    ``array`` has shape ``(D,)`` or ``(D, k)``; the columns are transformed
    independently, so ``apply_operator(Q, ..., rho)`` computes ``Q @ rho``.
    """
    labels = _as_labels(labels)
    axes = [layout.index(l) for l in labels]
    n = len(layout.dims)
    rest = [i for i in range(n) if i not in axes]
    perm = axes + rest
    extra = array.shape[1:]
    t = array.reshape(layout.dims + extra)
    t = np.moveaxis(t, perm, range(n))
    dg = int(np.prod([layout.dims[i] for i in axes]))
    shape_perm = t.shape
    t = op @ t.reshape(dg, -1)
    t = np.moveaxis(t.reshape(shape_perm), range(n), perm)
    return t.reshape(array.shape)


def _apply_projector(q: Projector, array: np.ndarray, layout: SubsystemLayout) -> np.ndarray:
    labels = q.check_fits(layout)
    return apply_operator(q.matrix, labels, array, layout)


def _sandwich(q: Projector, rho: np.ndarray, layout: SubsystemLayout) -> np.ndarray:
    left = _apply_projector(q, rho, layout)
    return _apply_projector(q, left.conj().T, layout).conj().T


def _clamp(p: float) -> float:
    return float(min(1.0, max(0.0, p)))


def expectation(state: State, op: np.ndarray, labels) -> float:
    """Real part of ``<op>`` for a Hermitian ``op`` acting on ``labels``."""
    if isinstance(state, Ket):
        v = apply_operator(np.asarray(op, dtype=complex), labels, state.amplitudes, state.layout)
        return float(np.vdot(state.amplitudes, v).real)
    m = apply_operator(np.asarray(op, dtype=complex), labels, state.matrix, state.layout)
    return float(np.trace(m).real)


def event_probability(state: State, q: Projector) -> float:
    """Born probability of the event ``q``, clamped to [0, 1]."""
    if isinstance(state, Ket):
        v = _apply_projector(q, state.amplitudes, state.layout)
        return _clamp(float(np.vdot(v, v).real))
    m = _apply_projector(q, state.matrix, state.layout)
    return _clamp(float(np.trace(m).real))


def branch_decompose(psi: Ket, beable: BeableObservable) -> list[Branch]:
    """Split ``psi`` into normalized branches, one per occurring beable value.

    Branches with weight at or below ``TOL_BRANCH`` are dropped; if every
    branch is dropped the state and beable are incompatible and an
    :class:`ImpossibleConditionError` is raised.
    """
    branches = []
    for i, q in enumerate(beable.projectors):
        v = _apply_projector(q, psi.amplitudes, psi.layout)
        w = float(np.vdot(v, v).real)
        if w <= TOL_BRANCH:
            continue
        branches.append(Branch(min(w, 1.0), Ket(v / np.sqrt(w), psi.layout), i))
    if not branches:
        raise ImpossibleConditionError("every branch weight is below the branch tolerance")
    return branches


def decohered_mixture(branches: Sequence[Branch]) -> DensityOperator:
    """``sum_i w_i |psi_i><psi_i|`` over the branches."""
    if not branches:
        raise StateError("cannot form a mixture of zero branches")
    layout = branches[0].ket.layout
    m = np.zeros((layout.dim, layout.dim), dtype=complex)
    for b in branches:
        if b.ket.layout != layout:
            raise StateError("branches live on different layouts")
        a = b.ket.amplitudes
        m += b.weight * np.outer(a, a.conj())
    return DensityOperator(m, layout, unit_trace=False)


def luders_decohere(state: State, beable: BeableObservable) -> DensityOperator:
    """Non-selective Lüders map ``sum_i Q_i rho Q_i``.

    For a pure state this equals the decohered mixture of its branches.
    """
    rho = state.to_density() if isinstance(state, Ket) else state
    m = sum(_sandwich(q, rho.matrix, rho.layout) for q in beable.projectors)
    return DensityOperator(m, rho.layout)


def partial_trace(rho: State, keep) -> DensityOperator:
    """Trace out every subsystem not in ``keep``.

    Kept subsystems appear in layout order. Trace is preserved, so an
    unnormalized operator stays unnormalized.
    """
    layout = rho.layout
    keep = layout.ordered(keep)
    if not keep or len(keep) == len(layout.labels):
        raise StateError("keep must be a non-empty proper subset of the layout labels")
    traced = layout.complement(keep)
    kept_idx = [layout.index(l) for l in keep]
    tr_idx = [layout.index(l) for l in traced]
    dk = layout.dim_of(keep)
    dt = layout.dim_of(traced)
    n = len(layout.dims)
    if isinstance(rho, Ket):
        t = np.transpose(rho.tensor(), kept_idx + tr_idx).reshape(dk, dt)
        m = t @ t.conj().T
        unit = True
    else:
        t = rho.matrix.reshape(layout.dims + layout.dims)
        perm = kept_idx + tr_idx + [n + i for i in kept_idx] + [n + i for i in tr_idx]
        t = np.transpose(t, perm).reshape(dk, dt, dk, dt)
        m = np.einsum("ajbj->ab", t)
        unit = abs(rho.trace - 1.0) <= TOL_ALG
    return DensityOperator(m, layout.sub(keep), unit_trace=unit)


def reduced_state(state: State, keep) -> DensityOperator:
    """Partial trace that also accepts ``keep`` equal to the whole layout."""
    keep = state.layout.ordered(keep)
    if len(keep) == len(state.layout.labels):
        return state.to_density() if isinstance(state, Ket) else state
    return partial_trace(state, keep)


def _default_keep(layout: SubsystemLayout, q: Projector, keep):
    labels = q.check_fits(layout)
    if keep is None:
        keep = layout.complement(labels)
    keep = layout.ordered(keep)
    if set(keep) & set(labels):
        raise StateError(f"kept subsystems {keep} overlap the conditioning event on {labels}")
    if not keep:
        raise StateError("nothing left to keep after conditioning")
    return keep


def conditional_subsystem_state(state: State, q: Projector, keep=None) -> tuple[float, DensityOperator]:
    """Weight of ``q`` and the state of ``keep`` conditioned on it.

    ``rho = w^{-1} Tr_rest(|psi><psi| q)``. By default ``keep`` is every
    subsystem ``q`` does not act on.
    """
    layout = state.layout
    keep = _default_keep(layout, q, keep)
    w = event_probability(state, q)
    if w <= TOL_BRANCH:
        raise ImpossibleConditionError(f"conditioning event has probability {w:.3g}")
    if isinstance(state, Ket):
        v = _apply_projector(q, state.amplitudes, layout) / np.sqrt(w)
        cond = Ket(v, layout, tol=1e-8)
    else:
        cond = DensityOperator(_sandwich(q, state.matrix, layout) / w, layout, tol=1e-8)
    return w, reduced_state(cond, keep)


def luders_conditioning(state: State, q: Projector) -> tuple[float, DensityOperator]:
    """Ideal-occurrence state change ``rho -> Q rho Q / Tr(rho Q)``."""
    rho = state.to_density() if isinstance(state, Ket) else state
    w = event_probability(rho, q)
    if w <= TOL_BRANCH:
        raise ImpossibleConditionError(f"conditioning event has probability {w:.3g}")
    return w, DensityOperator(_sandwich(q, rho.matrix, rho.layout) / w, rho.layout, tol=1e-8)


def _check_distinct(layout, p1: Projector, p2: Projector):
    l1, l2 = p1.check_fits(layout), p2.check_fits(layout)
    if set(l1) & set(l2):
        raise StateError(f"coincidence projectors overlap on subsystems {sorted(set(l1) & set(l2))}")


def coincidence_probability(state: State, p1: Projector, p2: Projector) -> float:
    """Probability that the commuting events ``p1`` and ``p2`` both occur."""
    layout = state.layout
    _check_distinct(layout, p1, p2)
    if isinstance(state, Ket):
        v = _apply_projector(p2, _apply_projector(p1, state.amplitudes, layout), layout)
        return _clamp(float(np.vdot(v, v).real))
    m = _apply_projector(p2, _apply_projector(p1, state.matrix, layout), layout)
    return _clamp(float(np.trace(m).real))


def interference_term(state: State, beable: BeableObservable, p1: Projector, p2: Projector) -> float:
    """Coincidence probability in ``state`` minus that in its decohered form.

    Nonzero exactly when the pair ``(p1, p2)`` can detect the coherence
    between beable branches. The raw signed difference is returned
    (without clamping the two probabilities first).
    """
    layout = state.layout
    _check_distinct(layout, p1, p2)

    def raw(m):
        m = _apply_projector(p2, _apply_projector(p1, m, layout), layout)
        return float(np.trace(m).real)

    if isinstance(state, Ket):
        rho = state.to_density().matrix
        mixed = decohered_mixture(branch_decompose(state, beable)).matrix
    else:
        rho = state.matrix
        mixed = luders_decohere(state, beable).matrix
    return raw(rho) - raw(mixed)


def interference_cross_terms(psi: Ket, beable: BeableObservable, p1: Projector, p2: Projector) -> float:
    """Sum of ``sqrt(w_i w_j) <psi_i|P1 P2|psi_j>`` over ordered pairs ``i != j``.

    Independent route to :func:`interference_term` for pure states.
    """
    layout = psi.layout
    _check_distinct(layout, p1, p2)
    branches = branch_decompose(psi, beable)
    total = 0.0
    for bi in branches:
        for bj in branches:
            if bi.value_index == bj.value_index:
                continue
            v = _apply_projector(p2, _apply_projector(p1, bj.ket.amplitudes, layout), layout)
            total += np.sqrt(bi.weight * bj.weight) * np.vdot(bi.ket.amplitudes, v)
    return float(np.real(total))


def everett_relative_state(psi: Ket, phi: Ket) -> tuple[float, Ket]:
    """Relative state of the remaining subsystems given ``phi`` on its own.

    ``phi``'s layout labels say which subsystems of ``psi`` it refers to.
    Returns ``(|<phi|psi>|^2, normalized contraction)``.
    """
    layout = psi.layout
    labels = phi.layout.labels
    for l, d in zip(labels, phi.layout.dims):
        if layout.dims[layout.index(l)] != d:
            raise StateError(f"subsystem {l!r} dimension mismatch")
    keep = layout.complement(labels)
    if not keep:
        raise StateError("relative state needs at least one remaining subsystem")
    ordered = list(labels)
    phi_t = phi.amplitudes.reshape(phi.layout.dims)
    idx = [layout.index(l) for l in ordered] + [layout.index(l) for l in keep]
    t = np.transpose(psi.tensor(), idx).reshape(phi.layout.dim, -1)
    v = phi_t.reshape(-1).conj() @ t
    w = float(np.vdot(v, v).real)
    if w <= TOL_BRANCH:
        raise ImpossibleConditionError(f"relative-state weight {w:.3g} is below the branch tolerance")
    return min(w, 1.0), Ket(v / np.sqrt(w), layout.sub(keep))
