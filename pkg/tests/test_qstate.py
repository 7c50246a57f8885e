import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from reldec import oracle
from reldec.qstate import (
    TOL_ALG,
    BeableObservable,
    DensityOperator,
    ImpossibleConditionError,
    Ket,
    Projector,
    StateError,
    SubsystemLayout,
    basis_ket,
    branch_decompose,
    coincidence_probability,
    conditional_subsystem_state,
    decohered_mixture,
    event_probability,
    everett_relative_state,
    interference_cross_terms,
    interference_term,
    luders_conditioning,
    partial_trace,
    tensor_product,
)
from reldec.randomized import random_beable, random_ket

from conftest import PLUS, S2


def qubit(amps, label):
    return Ket(amps, SubsystemLayout([2], [label]))


# --- layout and constructors -------------------------------------------------

def test_layout_validation():
    with pytest.raises(StateError):
        SubsystemLayout([2, 1])
    with pytest.raises(StateError):
        SubsystemLayout([2, 2], ["a", "a"])
    with pytest.raises(StateError):
        SubsystemLayout([])
    with pytest.raises(StateError, match="cap"):
        SubsystemLayout([2] * 13)
    assert SubsystemLayout([4] * 6).dim == 4096


def test_ket_must_be_normalized(qubits):
    with pytest.raises(StateError, match="normalized"):
        Ket([1, 1, 0, 0], qubits)


def test_projector_validation():
    with pytest.raises(StateError, match="idempotent"):
        Projector(np.diag([1.0, 0.5]), "1")
    with pytest.raises(StateError, match="Hermitian"):
        Projector(np.array([[1, 1], [0, 0]]), "1")


def test_beable_validation():
    p0 = Projector.basis(2, [0], "2")
    with pytest.raises(StateError, match="identity"):
        BeableObservable("2", [p0, Projector.onto([PLUS], "2")])
    with pytest.raises(StateError, match="at least two"):
        BeableObservable("2", [Projector(np.eye(2), "2")])
    with pytest.raises(StateError, match="inconsistent"):
        BeableObservable("2", [p0, Projector.basis(3, [1, 2], "2")])


def test_density_operator_checks(qubits):
    with pytest.raises(StateError, match="trace"):
        DensityOperator(np.eye(4), qubits)
    with pytest.raises(StateError, match="positive"):
        DensityOperator(np.diag([1.5, -0.5, 0, 0]), qubits)
    # tiny negative round-off is tolerated
    DensityOperator(np.diag([1.0 + 1e-12, -1e-12, 0, 0]), qubits)


# --- tensor_product ----------------------------------------------------------

def test_tensor_product_basis():
    k = tensor_product(qubit([1, 0], "1"), qubit([0, 1], "2"))
    np.testing.assert_array_equal(k.amplitudes, [0, 1, 0, 0])
    assert k.layout.labels == ("1", "2")


def test_tensor_product_superposition():
    k = tensor_product(qubit([S2, S2], "1"), qubit([1, 0], "2"))
    np.testing.assert_allclose(k.amplitudes, [S2, 0, S2, 0])


def test_tensor_product_rejects_duplicate_labels():
    with pytest.raises(StateError, match="duplicate"):
        tensor_product(qubit([1, 0], "1"), qubit([1, 0], "1"))


@given(st.integers(0, 2 ** 32 - 1))
def test_tensor_product_norm(seed):
    rng = np.random.default_rng(seed)
    a = random_ket(SubsystemLayout([3], ["a"]), rng)
    b = random_ket(SubsystemLayout([2], ["b"]), rng)
    assert abs(np.linalg.norm(tensor_product(a, b).amplitudes) - 1) <= TOL_ALG


# --- event_probability -------------------------------------------------------

def test_event_probability_examples(bell, qubits):
    q0 = Projector.basis(2, [0], "2")
    assert event_probability(bell, q0) == pytest.approx(0.5, abs=TOL_ALG)
    assert event_probability(bell, Projector(np.eye(4), "whole")) == pytest.approx(1.0, abs=TOL_ALG)
    assert event_probability(basis_ket(qubits, (0, 1)), q0) == 0.0
    assert event_probability(bell.to_density(), q0) == pytest.approx(0.5, abs=TOL_ALG)


def test_event_probability_dimension_mismatch(bell):
    with pytest.raises(StateError, match="dimension"):
        event_probability(bell, Projector.basis(3, [0], "2"))


# --- branch_decompose / decohered_mixture ------------------------------------

def test_branch_decompose_bell(bell, pointer, qubits):
    br = branch_decompose(bell, pointer)
    assert [b.value_index for b in br] == [0, 1]
    assert [b.weight for b in br] == pytest.approx([0.5, 0.5], abs=TOL_ALG)
    np.testing.assert_allclose(br[0].ket.amplitudes, basis_ket(qubits, (0, 0)).amplitudes, atol=TOL_ALG)
    np.testing.assert_allclose(br[1].ket.amplitudes, basis_ket(qubits, (1, 1)).amplitudes, atol=TOL_ALG)


def test_branch_decompose_eigenstate(pointer):
    psi = tensor_product(qubit([0.6, 0.8j], "1"), qubit([1, 0], "2"))
    (b,) = branch_decompose(psi, pointer)
    assert b.weight == pytest.approx(1.0)
    np.testing.assert_allclose(b.ket.amplitudes, psi.amplitudes)


def test_branch_decompose_two_branch_form(qubits, pointer):
    # |Psi> = sqrt(w') |Psi'> + sqrt(w'') |Psi''> with the pointer projections as branches
    w1, w2 = 0.3, 0.7
    psi1 = tensor_product(qubit([0.6, 0.8], "1"), qubit([1, 0], "2"))
    psi2 = tensor_product(qubit([S2, -1j * S2], "1"), qubit([0, 1], "2"))
    psi = Ket(np.sqrt(w1) * psi1.amplitudes + np.sqrt(w2) * psi2.amplitudes, qubits)
    b1, b2 = branch_decompose(psi, pointer)
    assert (b1.weight, b2.weight) == pytest.approx((w1, w2), abs=TOL_ALG)
    np.testing.assert_allclose(b1.ket.amplitudes, psi1.amplitudes, atol=TOL_ALG)
    np.testing.assert_allclose(b2.ket.amplitudes, psi2.amplitudes, atol=TOL_ALG)


def test_branch_decompose_drops_negligible(qubits, pointer):
    eps = 1e-13
    psi = Ket([np.sqrt(1 - eps), 0, 0, np.sqrt(eps)], qubits)
    assert len(branch_decompose(psi, pointer)) == 1


def test_decohered_mixture_examples(bell, pointer):
    br = branch_decompose(bell, pointer)
    (single,) = branch_decompose(br[0].ket, pointer)
    np.testing.assert_allclose(decohered_mixture([single]).matrix, br[0].ket.to_density().matrix)
    rho = decohered_mixture(br)
    np.testing.assert_allclose(rho.matrix, np.diag([0.5, 0, 0, 0.5]), atol=TOL_ALG)
    assert rho.purity == pytest.approx(0.5, abs=TOL_ALG)
    with pytest.raises(StateError):
        decohered_mixture([])


# --- partial_trace -----------------------------------------------------------

def test_partial_trace_product():
    phi = qubit([0.6, 0.8j], "1")
    psi = tensor_product(phi, qubit([S2, S2], "2"))
    rho = partial_trace(psi, {"1"})
    np.testing.assert_allclose(rho.matrix, phi.to_density().matrix, atol=TOL_ALG)
    assert rho.purity == pytest.approx(1.0)


def test_partial_trace_bell(bell):
    np.testing.assert_allclose(partial_trace(bell, {"1"}).matrix, np.eye(2) / 2, atol=TOL_ALG)


def test_partial_trace_tripartite():
    layout = SubsystemLayout([2, 2, 2])
    amps = np.zeros(8)
    amps[[0, 3]] = S2  # |0>_1 (|00> + |11>)_23 / sqrt 2
    psi = Ket(amps, layout)
    expected = oracle.partial_trace(psi.to_density().matrix, layout.dims, [0, 1])
    np.testing.assert_allclose(expected, np.kron(np.diag([1, 0]), np.eye(2) / 2), atol=TOL_ALG)
    np.testing.assert_allclose(partial_trace(psi, {"1", "2"}).matrix, expected, atol=TOL_ALG)
    np.testing.assert_allclose(partial_trace(psi.to_density(), {"1", "2"}).matrix, expected, atol=TOL_ALG)


@pytest.mark.parametrize("keep", [set(), {"1", "2"}])
def test_partial_trace_rejects_bad_keep(bell, keep):
    with pytest.raises(StateError):
        partial_trace(bell, keep)


# --- conditional states and Lüders conditioning ------------------------------

def test_conditional_state_bell(bell):
    w, rho = conditional_subsystem_state(bell, Projector.basis(2, [0], "2"))
    assert w == pytest.approx(0.5)
    np.testing.assert_allclose(rho.matrix, np.diag([1, 0]), atol=TOL_ALG)


def test_conditional_state_product_is_independent_of_condition():
    phi = qubit([0.6, 0.8j], "1")
    chi = qubit([S2, S2], "2")
    psi = tensor_product(phi, chi)
    for q in [Projector.basis(2, [0], "2"), Projector.onto([[0.6, 0.8]], "2")]:
        w, rho = conditional_subsystem_state(psi, q)
        assert w == pytest.approx(float(np.vdot(chi.amplitudes, q.matrix @ chi.amplitudes).real))
        np.testing.assert_allclose(rho.matrix, phi.to_density().matrix, atol=TOL_ALG)


def test_conditional_state_impossible(qubits):
    with pytest.raises(ImpossibleConditionError):
        conditional_subsystem_state(basis_ket(qubits, (0, 0)), Projector.basis(2, [1], "2"))


def test_luders_examples(qubits, bell):
    rho = DensityOperator(np.eye(4) / 4, qubits)
    w, out = luders_conditioning(rho, Projector.basis(2, [0], "2"))
    assert w == pytest.approx(0.5)
    np.testing.assert_allclose(out.matrix, np.kron(np.eye(2) / 2, np.diag([1, 0])), atol=TOL_ALG)

    inside = basis_ket(qubits, (1, 0)).to_density()
    w, out = luders_conditioning(inside, Projector.basis(2, [0], "2"))
    assert w == pytest.approx(1.0)
    np.testing.assert_allclose(out.matrix, inside.matrix, atol=TOL_ALG)

    q = Projector.basis(2, [0], "2")
    _, lu = luders_conditioning(bell, q)
    _, cond = conditional_subsystem_state(bell, q)
    np.testing.assert_allclose(partial_trace(lu, {"1"}).matrix, cond.matrix, atol=TOL_ALG)

    with pytest.raises(ImpossibleConditionError):
        luders_conditioning(basis_ket(qubits, (0, 0)), Projector.basis(2, [1], "2"))


# --- coincidence and interference --------------------------------------------

def test_coincidence_examples(bell, pointer, plus_pair):
    p1, p2 = plus_pair
    assert coincidence_probability(bell, p1, p2) == pytest.approx(0.5, abs=TOL_ALG)
    mix = decohered_mixture(branch_decompose(bell, pointer))
    assert coincidence_probability(mix, p1, p2) == pytest.approx(0.25, abs=TOL_ALG)
    eye1, eye2 = Projector(np.eye(2), "1"), Projector(np.eye(2), "2")
    assert coincidence_probability(bell, eye1, eye2) == pytest.approx(1.0, abs=TOL_ALG)
    with pytest.raises(StateError, match="overlap"):
        coincidence_probability(bell, p1, Projector.basis(2, [0], "1"))


def test_interference_examples(bell, pointer, plus_pair, qubits):
    p1, p2 = plus_pair
    assert interference_term(bell, pointer, p1, p2) == pytest.approx(0.25, abs=TOL_ALG)
    assert interference_cross_terms(bell, pointer, p1, p2) == pytest.approx(0.25, abs=TOL_ALG)
    diag1, diag2 = Projector.basis(2, [0], "1"), Projector.basis(2, [1], "2")
    assert abs(interference_term(bell, pointer, diag1, diag2)) <= TOL_ALG
    product = tensor_product(qubit([0.6, 0.8], "1"), qubit([1, 0], "2"))
    assert abs(interference_term(product, pointer, p1, p2)) <= TOL_ALG
    # density-operator form agrees with the pure-state form
    assert interference_term(bell.to_density(), pointer, p1, p2) == pytest.approx(0.25, abs=TOL_ALG)


# --- Everett relative state --------------------------------------------------

def test_everett_examples(bell):
    w, k = everett_relative_state(bell, qubit([1, 0], "2"))
    assert w == pytest.approx(0.5)
    np.testing.assert_allclose(k.amplitudes, [1, 0], atol=TOL_ALG)

    phi, chi = qubit([0.6, 0.8j], "1"), qubit([S2, -S2], "2")
    w, k = everett_relative_state(tensor_product(phi, chi), chi)
    assert w == pytest.approx(1.0)
    assert abs(abs(np.vdot(k.amplitudes, phi.amplitudes)) - 1) <= TOL_ALG

    with pytest.raises(ImpossibleConditionError):
        everett_relative_state(tensor_product(phi, chi), qubit([S2, S2], "2"))


# --- properties over random instances ----------------------------------------

instance = st.tuples(
    st.lists(st.integers(2, 4), min_size=2, max_size=3),
    st.integers(0, 2 ** 32 - 1),
)


def _instance(dims, seed):
    rng = np.random.default_rng(seed)
    layout = SubsystemLayout(dims)
    psi = random_ket(layout, rng)
    target = layout.labels[int(rng.integers(len(dims)))]
    beable = random_beable(layout, target, rng)
    keep = layout.complement([target])
    return layout, psi, beable, keep, rng


@settings(max_examples=60, deadline=None)
@given(instance)
def test_branch_invariants(inst):
    layout, psi, beable, _, _ = _instance(*inst)
    br = branch_decompose(psi, beable)
    assert abs(sum(b.weight for b in br) - 1) <= TOL_ALG
    recon = sum(np.sqrt(b.weight) * b.ket.amplitudes for b in br)
    assert np.linalg.norm(recon - psi.amplitudes) <= TOL_ALG
    for i, a in enumerate(br):
        for b in br[i + 1:]:
            assert abs(np.vdot(a.ket.amplitudes, b.ket.amplitudes)) <= TOL_ALG
    rho = decohered_mixture(br)
    assert np.max(np.abs(rho.matrix - rho.matrix.conj().T)) <= TOL_ALG
    assert np.linalg.eigvalsh(rho.matrix)[0] >= -TOL_ALG


@settings(max_examples=60, deadline=None)
@given(instance)
def test_weights_and_states_identity(inst):
    layout, psi, beable, keep, _ = _instance(*inst)
    total = 0
    for q in beable.projectors:
        if event_probability(psi, q) <= 1e-12:
            continue
        w, rho = conditional_subsystem_state(psi, q, keep)
        assert abs(rho.trace - 1) <= TOL_ALG
        assert np.linalg.eigvalsh(rho.matrix)[0] >= -TOL_ALG
        total = total + w * rho.matrix
        _, lu = luders_conditioning(psi, q)
        assert np.max(np.abs(partial_trace(lu, keep).matrix - rho.matrix)) <= TOL_ALG
    assert np.max(np.abs(total - partial_trace(psi, keep).matrix)) <= TOL_ALG


@settings(max_examples=40, deadline=None)
@given(instance)
def test_interference_vanishes_for_commuting_p2(inst):
    layout, psi, beable, keep, rng = _instance(*inst)
    d1 = layout.dim_of(keep)
    p1 = Projector.onto([rng.normal(size=d1) + 1j * rng.normal(size=d1)], keep)
    # P2 built from beable projectors commutes with all of them
    p2 = beable.projectors[0]
    assert abs(interference_term(psi, beable, p1, p2)) <= TOL_ALG
    assert 0 <= coincidence_probability(psi, p1, p2) <= 1


@settings(max_examples=40, deadline=None)
@given(instance)
def test_interference_matches_cross_terms(inst):
    layout, psi, beable, keep, rng = _instance(*inst)
    d1, d2 = layout.dim_of(keep), layout.dim_of(beable.subsystems)
    p1 = Projector.onto([rng.normal(size=d1) + 1j * rng.normal(size=d1)], keep)
    p2 = Projector.onto([rng.normal(size=d2) + 1j * rng.normal(size=d2)], beable.subsystems)
    assert abs(interference_term(psi, beable, p1, p2) - interference_cross_terms(psi, beable, p1, p2)) <= TOL_ALG


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 4), st.integers(2, 4), st.integers(0, 2 ** 32 - 1))
def test_everett_purity(d1, d2, seed):
    rng = np.random.default_rng(seed)
    layout = SubsystemLayout([d1, d2])
    psi = random_ket(layout, rng)
    phi = random_ket(SubsystemLayout([d2], ["2"]), rng)
    w, k = everett_relative_state(psi, phi)
    q = Projector(np.outer(phi.amplitudes, phi.amplitudes.conj()), "2")
    w2, rho = conditional_subsystem_state(psi, q)
    assert abs(w - w2) <= TOL_ALG
    assert rho.purity >= 1 - TOL_ALG
    np.testing.assert_allclose(rho.matrix, k.to_density().matrix, atol=TOL_ALG)
