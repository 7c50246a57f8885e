"""Brute-force reference computations.

Slow, loop-based versions of the quantities in :mod:`reldec.qstate`. They
work on plain index arithmetic over multi-indices and share no code with
the reshape/transpose paths, so agreement between the two is meaningful.
Only intended for total dimensions up to a few dozen.
"""
from __future__ import annotations

import itertools

import numpy as np

ORACLE_MAX_DIM = 64


def _multi_indices(dims):
    return list(itertools.product(*[range(d) for d in dims]))


def _flat(multi, dims):
    i = 0
    for m, d in zip(multi, dims):
        i = i * d + m
    return i


def embed(op, positions, dims):
    """Full-space matrix of ``op`` acting on the factors at ``positions``.

    ``op`` is indexed by the multi-index of those factors in the order given.
    """
    op = np.asarray(op, dtype=complex)
    dims = list(dims)
    sub_dims = [dims[p] for p in positions]
    total = int(np.prod(dims))
    if total > ORACLE_MAX_DIM:
        raise ValueError(f"oracle limited to total dimension {ORACLE_MAX_DIM}")
    full = np.zeros((total, total), dtype=complex)
    sub_idx = _multi_indices(sub_dims)
    for a in _multi_indices(dims):
        ra = _flat([a[p] for p in positions], sub_dims)
        for s in sub_idx:
            # b agrees with a outside ``positions``
            b = list(a)
            for p, v in zip(positions, s):
                b[p] = v
            full[_flat(a, dims), _flat(b, dims)] = op[ra, _flat(s, sub_dims)]
    return full


def partial_trace(rho, dims, keep_positions):
    """Reduced matrix on ``keep_positions`` (kept in ascending order)."""
    rho = np.asarray(rho, dtype=complex)
    dims = list(dims)
    if int(np.prod(dims)) > ORACLE_MAX_DIM:
        raise ValueError(f"oracle limited to total dimension {ORACLE_MAX_DIM}")
    keep = sorted(keep_positions)
    traced = [k for k in range(len(dims)) if k not in keep]
    kdims = [dims[k] for k in keep]
    dk = int(np.prod(kdims))
    out = np.zeros((dk, dk), dtype=complex)
    for ka in _multi_indices(kdims):
        for kb in _multi_indices(kdims):
            s = 0j
            for t in _multi_indices([dims[k] for k in traced]):
                a = [0] * len(dims)
                b = [0] * len(dims)
                for p, v in zip(keep, ka):
                    a[p] = v
                for p, v in zip(keep, kb):
                    b[p] = v
                for p, v in zip(traced, t):
                    a[p] = v
                    b[p] = v
                s += rho[_flat(a, dims), _flat(b, dims)]
            out[_flat(ka, kdims), _flat(kb, kdims)] = s
    return out


def weight(psi, dims, q, q_positions):
    """``<psi|Q|psi>`` with ``Q`` embedded by brute force."""
    psi = np.asarray(psi, dtype=complex)
    return float(np.vdot(psi, embed(q, q_positions, dims) @ psi).real)


def conditional_state(psi, dims, q, q_positions, keep_positions):
    """``w^{-1} Tr_rest(|psi><psi| Q)`` from full matrices."""
    psi = np.asarray(psi, dtype=complex)
    rho = np.outer(psi, psi.conj())
    m = rho @ embed(q, q_positions, dims)
    w = float(np.trace(m).real)
    return w, partial_trace(m, dims, keep_positions) / w


def conditional_expectation(psi, dims, c, c_positions, q, q_positions):
    """``w^{-1} Tr(|psi><psi| (C x Q))`` with both operators embedded."""
    psi = np.asarray(psi, dtype=complex)
    qf = embed(q, q_positions, dims)
    cf = embed(c, c_positions, dims)
    w = float(np.vdot(psi, qf @ psi).real)
    return float(np.vdot(psi, cf @ qf @ psi).real) / w
