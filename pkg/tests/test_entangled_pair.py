import math

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from backend.entangled_pair import (
    OUTCOMES,
    BellAxes,
    DensityMatrix2,
    JointDistribution,
    JointOutcome,
    Particle,
    TwoQubitState,
    basis_change,
    bell_quantity,
    condition_on,
    conditional_probabilities,
    density_product_expectation,
    density_product_trace,
    expand_in_bases,
    expand_in_kets,
    joint_expectation,
    joint_probabilities,
    maximally_mixed,
    operator_expectation,
    pair_equal_up_to_global_phase,
    random_pair_state,
    reduce,
    sign_weighted_overlap_sum,
    singlet,
    singlet_form_check,
    tensor,
)
from backend.photon_optics import polarization_state
from backend.spin_algebra import (
    KET_MINUS_Z,
    KET_PLUS_Z,
    X_AXIS,
    Y_AXIS,
    Z_AXIS,
    Axis,
    ImpossibleOutcomeError,
    QubitState,
    angle_between,
    axis_eigenstates,
    equal_up_to_global_phase,
    random_axis,
    theta_axis,
)

TOL = 1e-12
R = 1.0 / math.sqrt(2.0)


@pytest.fixture
def rng():
    return np.random.default_rng(2024)


def test_singlet_amplitudes_and_products():
    assert np.allclose(singlet().vector, [0, R, -R, 0], atol=TOL)
    assert np.allclose(tensor(KET_PLUS_Z, KET_MINUS_Z).vector, [0, 1, 0, 0], atol=TOL)
    plus_x, _ = axis_eigenstates(X_AXIS)
    assert np.allclose(tensor(plus_x, plus_x).vector, [0.5, 0.5, 0.5, 0.5], atol=TOL)
    built = (tensor(KET_PLUS_Z, KET_MINUS_Z).vector - tensor(KET_MINUS_Z, KET_PLUS_Z).vector) * R
    assert np.allclose(built, singlet().vector, atol=TOL)


def test_tensor_of_states_at_norm_tolerance():
    edge = QubitState(1.0 + 4e-13, 0.0)
    product = tensor(edge, edge)
    assert float(np.sum(np.abs(product.vector) ** 2)) == pytest.approx(1.0, abs=TOL)
    assert pair_equal_up_to_global_phase(product, tensor(KET_PLUS_Z, KET_PLUS_Z))


def test_state_validation():
    with pytest.raises(ValueError):
        TwoQubitState((1.0, 1.0, 0.0, 0.0))
    with pytest.raises(ValueError):
        JointOutcome(1, 0)
    with pytest.raises(ValueError):
        JointDistribution((0.5, 0.5, 0.5, 0.0))


def test_singlet_form_in_x_y_and_random_axes(rng):
    assert singlet_form_check(singlet(), X_AXIS)
    assert singlet_form_check(singlet(), Y_AXIS)
    for _ in range(100):
        axis = random_axis(rng)
        assert singlet_form_check(singlet(), axis)
        probs = np.abs(expand_in_bases(singlet(), axis, axis)) ** 2
        assert probs[1] == pytest.approx(0.5, abs=TOL)
        assert probs[2] == pytest.approx(0.5, abs=TOL)
        assert probs[0] <= TOL and probs[3] <= TOL


def test_basis_change_of_product_state_is_product():
    plus_x, minus_x = axis_eigenstates(X_AXIS)
    rewritten = basis_change(tensor(plus_x, minus_x), X_AXIS, X_AXIS)
    assert pair_equal_up_to_global_phase(rewritten, TwoQubitState((0.0, 1.0, 0.0, 0.0)))


@pytest.mark.parametrize("alpha,beta", [(math.pi / 3, 0.0), (1.1, 2.3), (2.9, 5.0)])
def test_expansion_coefficients_for_z_and_n(alpha, beta):
    dist = joint_probabilities(singlet(), Z_AXIS, Axis(alpha, beta))
    s2 = math.sin(alpha / 2) ** 2 / 2
    c2 = math.cos(alpha / 2) ** 2 / 2
    assert dist[(1, 1)] == pytest.approx(s2, abs=TOL)
    assert dist[(1, -1)] == pytest.approx(c2, abs=TOL)
    assert dist[(-1, 1)] == pytest.approx(c2, abs=TOL)
    assert dist[(-1, -1)] == pytest.approx(s2, abs=TOL)
    assert sum(np.abs(expand_in_bases(singlet(), Z_AXIS, Axis(alpha, beta))) ** 2) == pytest.approx(1.0, abs=TOL)


def test_expansion_examples_z_z_and_z_x():
    assert joint_probabilities(singlet(), Z_AXIS, Z_AXIS).probabilities == pytest.approx((0, 0.5, 0.5, 0), abs=TOL)
    assert joint_probabilities(singlet(), Z_AXIS, X_AXIS).probabilities == pytest.approx((0.25,) * 4, abs=TOL)


def test_expand_in_kets_matches_axis_expansion():
    n = Axis(1.1, 0.4)
    coeffs = expand_in_kets(singlet(), axis_eigenstates(Z_AXIS), axis_eigenstates(n))
    assert np.allclose(coeffs, expand_in_bases(singlet(), Z_AXIS, n), atol=TOL)

    # repeated ket is not a basis
    with pytest.raises(ValueError):
        expand_in_kets(tensor(KET_PLUS_Z, KET_PLUS_Z), (KET_PLUS_Z, KET_PLUS_Z), axis_eigenstates(Z_AXIS))


def test_joint_expectation_examples():
    assert joint_expectation(singlet(), Z_AXIS, Z_AXIS) == pytest.approx(-1.0, abs=TOL)
    assert joint_expectation(singlet(), Z_AXIS, Axis(math.pi / 2)) == pytest.approx(0.0, abs=TOL)
    assert joint_expectation(singlet(), Z_AXIS, Axis(math.pi / 3)) == pytest.approx(-0.5, abs=TOL)


def test_joint_expectation_random_pairs(rng):
    for _ in range(100):
        a, b = random_axis(rng), random_axis(rng)
        expected = -float(np.dot(a.unit_vector(), b.unit_vector()))
        assert joint_expectation(singlet(), a, b) == pytest.approx(expected, abs=TOL)
        # both forms agree for arbitrary states too
        state = random_pair_state(rng)
        assert joint_expectation(state, a, b) == pytest.approx(operator_expectation(state, a, b), abs=1e-10)


def test_singlet_marginals_are_uniform(rng):
    for _ in range(20):
        dist = joint_probabilities(singlet(), random_axis(rng), random_axis(rng))
        for s in (1, -1):
            assert dist.marginal_a(s) == pytest.approx(0.5, abs=TOL)
            assert dist.marginal_b(s) == pytest.approx(0.5, abs=TOL)


def test_z_then_y_later_outcome_is_fifty_fifty():
    cond = conditional_probabilities(singlet(), Z_AXIS, Y_AXIS)
    assert set(cond) == set(OUTCOMES)
    for p in cond.values():
        assert p == pytest.approx(0.5, abs=TOL)


@pytest.mark.parametrize(
    "degrees,expected",
    [((0, 45, 90), math.sqrt(2.0)), ((0, 0, 0), 1.0), ((0, 60, 120), 1.5)],
)
def test_bell_quantity_examples(degrees, expected):
    axes = BellAxes(*(theta_axis(math.radians(d)) for d in degrees))
    assert bell_quantity(singlet(), axes) == pytest.approx(expected, abs=1e-9)


def test_bell_quantity_rotation_invariant():
    axes = BellAxes(*(theta_axis(math.radians(d)) for d in (0, 45, 90)))
    base = bell_quantity(singlet(), axes)
    rotations = Rotation.random(20, 7)
    for i in range(len(rotations)):
        rot = rotations[i]
        turned = BellAxes(*(Axis.from_vector(rot.apply(a.unit_vector())) for a in (axes.first, axes.second, axes.third)))
        assert bell_quantity(singlet(), turned) == pytest.approx(base, abs=TOL)
        assert turned.pairwise_angles()["13"] == pytest.approx(math.pi / 2, abs=1e-9)


def test_reduce_examples():
    assert np.allclose(reduce(singlet(), Particle.A).matrix, np.eye(2) / 2, atol=TOL)
    assert np.allclose(reduce(singlet(), "b").matrix, np.eye(2) / 2, atol=TOL)
    assert np.allclose(reduce(tensor(KET_PLUS_Z, KET_MINUS_Z), Particle.A).matrix, np.diag([1, 0]), atol=TOL)
    assert np.allclose(reduce(tensor(KET_PLUS_Z, KET_MINUS_Z), Particle.B).matrix, np.diag([0, 1]), atol=TOL)
    assert np.allclose(reduce(polarization_state(), Particle.A).matrix, np.eye(2) / 2, atol=TOL)


def test_density_matrix_validation():
    with pytest.raises(ValueError):
        DensityMatrix2(np.array([[0.5, 0.3], [0.1, 0.5]]))
    with pytest.raises(ValueError):
        DensityMatrix2(np.eye(2))
    with pytest.raises(ValueError):
        DensityMatrix2(np.diag([1.5, -0.5]))
    assert maximally_mixed().is_maximally_mixed()


def test_density_product_examples():
    rho = maximally_mixed()
    assert density_product_expectation(rho, Z_AXIS, Axis(math.pi / 4)) == pytest.approx(0.7071067812, abs=1e-10)
    assert density_product_expectation(rho, Z_AXIS, Z_AXIS) == pytest.approx(1.0, abs=TOL)
    assert density_product_expectation(rho, Z_AXIS, Axis(math.pi / 2)) == pytest.approx(0.0, abs=TOL)
    # a pure state keeps the imaginary part of sigma_z sigma_x
    assert abs(density_product_trace(reduce(tensor(axis_eigenstates(Y_AXIS)[0], KET_PLUS_Z), "a"), Z_AXIS, X_AXIS).imag) > 0.5


def test_sign_weighted_sum_matches_trace(rng):
    assert sign_weighted_overlap_sum(Z_AXIS, Z_AXIS) == pytest.approx(1.0, abs=TOL)
    assert sign_weighted_overlap_sum(Z_AXIS, Axis(math.pi / 3)) == pytest.approx(0.5, abs=TOL)
    rho = maximally_mixed()
    for _ in range(200):
        a, b = random_axis(rng), random_axis(rng)
        value = sign_weighted_overlap_sum(a, b)
        assert value == pytest.approx(math.cos(angle_between(a, b)), abs=TOL)
        assert value == pytest.approx(density_product_expectation(rho, a, b), abs=TOL)


def test_condition_on_singlet():
    prob, partner = condition_on(singlet(), Particle.A, KET_PLUS_Z)
    assert prob == pytest.approx(0.5, abs=TOL)
    assert equal_up_to_global_phase(partner, KET_MINUS_Z)

    prob, partner = condition_on(singlet(), Particle.B, KET_PLUS_Z)
    assert equal_up_to_global_phase(partner, KET_MINUS_Z)

    with pytest.raises(ImpossibleOutcomeError):
        condition_on(tensor(KET_PLUS_Z, KET_PLUS_Z), Particle.A, KET_MINUS_Z)
