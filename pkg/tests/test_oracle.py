import itertools

import numpy as np
import pytest

from reldec import oracle
from reldec.qstate import (
    TOL_ALG,
    SubsystemLayout,
    conditional_subsystem_state,
    event_probability,
    partial_trace,
)
from reldec.randomized import random_beable, random_hermitian, random_ket


def small_layouts(max_dim=64):
    """Every ordered dims tuple with factors in 2..8 and product <= max_dim."""
    out = []
    for n in range(2, 7):
        for dims in itertools.product(range(2, 9), repeat=n):
            if int(np.prod(dims)) <= max_dim:
                out.append(dims)
    return out


LAYOUTS = small_layouts()


def test_layout_enumeration_is_broad():
    assert (2, 2, 2, 2, 2, 2) in LAYOUTS
    assert (8, 8) in LAYOUTS
    assert (4, 4, 4) in LAYOUTS


def test_embed_matches_kron():
    rng = np.random.default_rng(1)
    a, b = random_hermitian(2, rng), random_hermitian(3, rng)
    np.testing.assert_allclose(oracle.embed(a, [0], [2, 3]), np.kron(a, np.eye(3)))
    np.testing.assert_allclose(oracle.embed(b, [1], [2, 3]), np.kron(np.eye(2), b))


@pytest.mark.parametrize("dims", LAYOUTS, ids=lambda d: "x".join(map(str, d)))
def test_partial_trace_matches_oracle(dims):
    rng = np.random.default_rng(abs(hash(dims)) % 2 ** 32)
    layout = SubsystemLayout(dims)
    psi = random_ket(layout, rng)
    rho = psi.to_density()
    n = len(dims)
    for size in range(1, n):
        for keep in itertools.combinations(range(n), size):
            labels = [layout.labels[k] for k in keep]
            expected = oracle.partial_trace(rho.matrix, dims, keep)
            assert np.max(np.abs(partial_trace(rho, labels).matrix - expected)) <= TOL_ALG
            assert np.max(np.abs(partial_trace(psi, labels).matrix - expected)) <= TOL_ALG


@pytest.mark.parametrize("dims", [d for d in LAYOUTS if len(d) <= 3], ids=lambda d: "x".join(map(str, d)))
def test_theory_quantities_match_oracle(dims):
    rng = np.random.default_rng(sum(dims) * 7919 + len(dims))
    layout = SubsystemLayout(dims)
    psi = random_ket(layout, rng)
    target = int(rng.integers(len(dims)))
    beable = random_beable(layout, layout.labels[target], rng)
    keep_pos = [k for k in range(len(dims)) if k != target]
    keep = [layout.labels[k] for k in keep_pos]
    c = random_hermitian(layout.dim_of(keep), rng)
    for q in beable.projectors:
        w = event_probability(psi, q)
        assert abs(w - oracle.weight(psi.amplitudes, dims, q.matrix, [target])) <= TOL_ALG
        w2, rho = conditional_subsystem_state(psi, q, keep)
        w3, rho_o = oracle.conditional_state(psi.amplitudes, dims, q.matrix, [target], keep_pos)
        assert abs(w2 - w3) <= TOL_ALG
        assert np.max(np.abs(rho.matrix - rho_o)) <= TOL_ALG
        ev = float(np.trace(c @ rho.matrix).real)
        ev_o = oracle.conditional_expectation(psi.amplitudes, dims, c, keep_pos, q.matrix, [target])
        assert abs(ev - ev_o) <= TOL_ALG


def test_oracle_refuses_large_dimension():
    with pytest.raises(ValueError):
        oracle.partial_trace(np.eye(128), [2] * 7, [0])
