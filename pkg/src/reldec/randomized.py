"""Random test instances: Haar-ish kets, unitaries, beables and observables."""
from __future__ import annotations

import numpy as np

from .qstate import BeableObservable, Ket, Projector, SubsystemLayout


def random_ket(layout: SubsystemLayout, rng: np.random.Generator) -> Ket:
    v = rng.normal(size=layout.dim) + 1j * rng.normal(size=layout.dim)
    return Ket.normalized(v, layout)


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def random_hermitian(dim: int, rng: np.random.Generator) -> np.ndarray:
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return (a + a.conj().T) / 2


def random_beable(layout: SubsystemLayout, subsystems, rng: np.random.Generator, n_values: int | None = None,
                  name: str = "random") -> BeableObservable:
    """Beable from a random orthonormal basis split into ``n_values`` groups."""
    subsystems = (subsystems,) if isinstance(subsystems, str) else tuple(subsystems)
    d = layout.dim_of(subsystems)
    if n_values is None:
        n_values = int(rng.integers(2, d + 1))
    u = random_unitary(d, rng)
    cuts = np.sort(rng.choice(np.arange(1, d), size=n_values - 1, replace=False))
    groups = np.split(np.arange(d), cuts)
    projs = [Projector(u[:, g] @ u[:, g].conj().T, subsystems) for g in groups]
    return BeableObservable(subsystems, projs, name=name)
