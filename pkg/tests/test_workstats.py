import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nhwork.errors import ValidationError
from nhwork.evolve import ScaledPropagator, full_propagator
from nhwork.model import DriveProfile, LatticeSpec, build_h0, eigenbasis, gibbs_weights
from nhwork.workstats import (
    bath_populations,
    characteristic_function,
    hermitian_tpm,
    jarzynski_estimator,
    moments,
    purified_transition_table,
    system_energy_change,
    table_from_propagator,
    work_distribution,
)

SUDDEN_1 = DriveProfile("sudden", 1.0)
DIMER = LatticeSpec(sites=2, gamma=1.0)

# 2x2 closed-form exponential evaluated at 30 digits, independent of this package
FROZEN_DIMER = np.array(
    [
        [0.7579511559807618373, 0.016625387647943146793],
        [0.12284592199712060676, 0.10257753437417440915],
    ]
)


def test_frozen_dimer_table():
    table = purified_transition_table(DIMER, SUDDEN_1, 1.0)
    np.testing.assert_allclose(table.energies, [-1.0, 1.0], atol=1e-14)
    np.testing.assert_allclose(table.probabilities, FROZEN_DIMER, rtol=0, atol=1e-12)


def test_infinite_temperature_form():
    table = purified_transition_table(DIMER, SUDDEN_1, 0.0)
    energies, vectors = eigenbasis(build_h0(DIMER))
    u = full_propagator(DIMER, SUDDEN_1).effective()
    amp2 = np.abs(vectors.T @ u @ vectors) ** 2
    np.testing.assert_allclose(table.probabilities, amp2 / amp2.sum(), atol=1e-13)
    np.testing.assert_allclose(table.initial_marginal, amp2.sum(axis=0) / amp2.sum(), atol=1e-13)


@pytest.mark.parametrize("shape", ["slow_sine", "sudden"])
@pytest.mark.parametrize("beta", [0.0, 0.1, 1.0, 1000.0])
def test_hermitian_collapse(shape, beta):
    spec = LatticeSpec(sites=8)
    profile = DriveProfile(shape, 5.0)
    a = purified_transition_table(spec, profile, beta)
    b = hermitian_tpm(spec, profile, beta)
    assert np.max(np.abs(a.probabilities - b.probabilities)) <= 1e-12


def test_hermitian_tpm_identity_process():
    # H0 commutes with itself, so a constant-H0 drive is diagonal in the eigenbasis
    spec = LatticeSpec(sites=6)
    table = hermitian_tpm(spec, DriveProfile("sudden", 3.0), 2.0)
    energies, _ = eigenbasis(build_h0(spec))
    np.testing.assert_allclose(table.probabilities, np.diag(gibbs_weights(energies, 2.0)), atol=1e-12)
    w_ave, var = moments(work_distribution(table))
    assert abs(w_ave) <= 1e-12 and var <= 1e-12


def test_hermitian_tpm_column_stochastic():
    spec = LatticeSpec(sites=6, g2=0.7)
    table = hermitian_tpm(spec, DriveProfile("slow_sine", 4.0), 0.0)
    # beta = 0 columns carry 1/L each
    np.testing.assert_allclose(table.initial_marginal, 1.0 / 6, atol=1e-12)


def test_identity_propagator_gives_gibbs_diagonal():
    spec = LatticeSpec(sites=4)
    energies, vectors = eigenbasis(build_h0(spec))
    prop = ScaledPropagator(np.eye(4, dtype=complex), -3.0, 0.0, 1.0)
    table = table_from_propagator(prop, energies, vectors, 0.5)
    np.testing.assert_allclose(table.probabilities, np.diag(gibbs_weights(energies, 0.5)), atol=1e-14)
    assert table.log_norm == pytest.approx(-6.0)
    dist = work_distribution(table)
    zero = np.flatnonzero(np.abs(dist.w) < 1e-12)
    assert len(zero) == 1
    assert dist.p[zero[0]] == pytest.approx(1.0, abs=1e-14)


@pytest.mark.parametrize("shape", ["slow_sine", "sudden"])
@pytest.mark.parametrize("beta", [0.1, 1.0, 10.0])
def test_jarzynski_hermitian(shape, beta):
    table = hermitian_tpm(LatticeSpec(sites=8, g2=0.6), DriveProfile(shape, 3.0), beta)
    assert jarzynski_estimator(table) == pytest.approx(1.0, abs=1e-8)


def test_jarzynski_recorded_for_nonhermitian():
    table = purified_transition_table(LatticeSpec(sites=6, gamma=2.1), DriveProfile("sudden", 2.0), 1.0)
    assert np.isfinite(jarzynski_estimator(table))


@pytest.mark.parametrize("gamma", [0.0, 1.0, 2.1])
def test_characteristic_function(gamma):
    table = purified_transition_table(LatticeSpec(sites=6, gamma=gamma), DriveProfile("sudden", 2.0), 1.0)
    assert abs(characteristic_function(table, [0.0])[0] - 1.0) <= 1e-12
    h = 1e-5
    plus, minus = characteristic_function(table, [h, -h])
    derivative = -1j * (plus - minus) / (2 * h)
    w_ave, _ = moments(work_distribution(table))
    assert abs(derivative - w_ave) <= 1e-6


def test_characteristic_function_at_large_imaginary_argument():
    table = hermitian_tpm(LatticeSpec(sites=20), DriveProfile("sudden", 1.0), 1000.0)
    assert np.isfinite(characteristic_function(table, [1000j])[0])


def test_dimer_atoms():
    table = purified_transition_table(DIMER, SUDDEN_1, 1.0)
    dist = work_distribution(table)
    np.testing.assert_allclose(dist.w, [-2.0, 0.0, 2.0], atol=1e-12)
    assert dist.p.sum() == pytest.approx(1.0, abs=1e-12)
    assert dist.p[0] == pytest.approx(FROZEN_DIMER[0, 1], abs=1e-12)


@pytest.mark.parametrize("gamma", [0.0, 1.9, 2.1])
def test_merge_robustness(gamma):
    table = purified_transition_table(LatticeSpec(sites=10, gamma=gamma), DriveProfile("slow_sine", 5.0), 1.0)
    ref = moments(work_distribution(table, 1e-8))
    for tol in (1e-12, 1e-10, 1e-9):
        dist = work_distribution(table, tol)
        assert abs(dist.p.sum() - table.probabilities.sum()) <= 1e-12
        m = moments(dist)
        assert abs(m[0] - ref[0]) <= 1e-9
        assert abs(m[1] - ref[1]) <= 1e-9


def test_moments_examples():
    from nhwork.workstats import WorkDistribution

    assert moments(WorkDistribution(np.array([0.0]), np.array([1.0]), 1e-8)) == (0.0, 0.0)
    assert moments(WorkDistribution(np.array([-1.0, 1.0]), np.array([0.5, 0.5]), 1e-8)) == (0.0, 1.0)


@settings(max_examples=25, deadline=None)
@given(c=st.floats(-50, 50), beta=st.sampled_from([0.0, 1.0, 100.0]))
def test_scale_invariance(c, beta):
    spec = LatticeSpec(sites=6, gamma=2.1, delta=0.2)
    prop = full_propagator(spec, DriveProfile("sudden", 2.0))
    energies, vectors = eigenbasis(build_h0(spec))
    a = table_from_propagator(prop, energies, vectors, beta)
    b = table_from_propagator(prop.rescaled(c), energies, vectors, beta)
    np.testing.assert_allclose(b.probabilities, a.probabilities, rtol=1e-12, atol=1e-15)
    assert b.log_norm == pytest.approx(a.log_norm, abs=1e-9)


@pytest.mark.parametrize("gamma", [1.0, 2.1])
def test_normalization_and_nonnegativity(gamma):
    for rounds in (1, 2):
        for beta in (0.0, 0.1, 1000.0):
            table = purified_transition_table(
                LatticeSpec(sites=8, gamma=gamma, delta=0.1 * gamma),
                DriveProfile("slow_sine", 5.0, rounds),
                beta,
            )
            assert np.all(table.probabilities >= 0)
            assert abs(table.probabilities.sum() - 1.0) <= 1e-10


def test_degenerate_basis_independence():
    spec = LatticeSpec(sites=8, g1=1.0, g2=1.0, gamma=1.0, boundary="periodic")
    profile = DriveProfile("slow_sine", 5.0)
    energies, vectors = eigenbasis(build_h0(spec))
    rng = np.random.default_rng(7)
    mixed = vectors.copy()
    i = 0
    clusters = 0
    while i < len(energies):
        j = i
        while j + 1 < len(energies) and abs(energies[j + 1] - energies[i]) < 1e-9:
            j += 1
        if j > i:
            q, _ = np.linalg.qr(rng.normal(size=(j - i + 1, j - i + 1)))
            mixed[:, i : j + 1] = vectors[:, i : j + 1] @ q
            clusters += 1
        i = j + 1
    assert clusters > 0
    a = work_distribution(purified_transition_table(spec, profile, 1.0))
    b = work_distribution(purified_transition_table(spec, profile, 1.0, basis=(energies, mixed)))
    np.testing.assert_allclose(a.w, b.w, atol=1e-12)
    np.testing.assert_allclose(a.p, b.p, atol=1e-9)


def test_bath_populations():
    spec = LatticeSpec(sites=6, gamma=2.1)
    profile = DriveProfile("sudden", 3.0)
    energies, _ = eigenbasis(build_h0(spec))
    np.testing.assert_array_equal(bath_populations(spec, profile, 1.0, 0.0), gibbs_weights(energies, 1.0))
    p = bath_populations(spec, profile, 1.0, 3.0)
    assert np.all(p >= 0) and p.sum() == pytest.approx(1.0, abs=1e-10)
    # consistent with the initial marginal of the transition table
    table = purified_transition_table(spec, profile, 1.0)
    np.testing.assert_allclose(p, table.initial_marginal, atol=1e-12)

    herm = bath_populations(spec.replace(gamma=0.0), profile, 1.0, 1.7)
    np.testing.assert_allclose(herm, gibbs_weights(energies, 1.0), atol=1e-12)


def test_system_energy_change():
    spec = LatticeSpec(sites=6, g2=0.5)
    profile = DriveProfile("slow_sine", 4.0)
    w_ave, _ = moments(work_distribution(hermitian_tpm(spec, profile, 1.0)))
    assert system_energy_change(spec, profile, 1.0) == pytest.approx(w_ave, abs=1e-8)
    still = DriveProfile("sudden", 1.0)
    assert system_energy_change(LatticeSpec(sites=6), still, 1.0) == pytest.approx(0.0, abs=1e-12)


def test_negative_beta_rejected():
    with pytest.raises(ValidationError):
        purified_transition_table(DIMER, SUDDEN_1, -1.0)
    with pytest.raises(ValidationError):
        hermitian_tpm(DIMER, SUDDEN_1, float("nan"))


def test_rounding_floor_is_refused():
    from nhwork.errors import ExtinctionError

    # momentum conservation on the ring keeps the ground level away from the
    # growing modes, so its column is pure rounding noise after a long drive
    ring = LatticeSpec(sites=20, gamma=2.1, boundary="periodic")
    profile = DriveProfile("sudden", 50.0)
    with pytest.raises(ExtinctionError):
        purified_transition_table(ring, profile, 1000.0)
    table = purified_transition_table(ring, profile, 0.1)
    assert table.unresolved_mass <= 1e-6


def test_unresolved_mass_negligible_on_open_chain():
    table = purified_transition_table(LatticeSpec(sites=20, gamma=2.1), DriveProfile("slow_sine", 50.0), 1000.0)
    assert table.unresolved_mass <= 1e-8
