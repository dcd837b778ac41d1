import numpy as np
import pytest

from nhwork.errors import ValidationError
from nhwork.evolve import (
    ScaledPropagator,
    evolve_density,
    full_propagator,
    naive_tpm_from_propagator,
    naive_tpm_state,
    propagate,
    propagate_hamiltonian,
    purity,
    trace_distance,
)
from nhwork.model import DriveProfile, LatticeSpec, build_h0, thermal_state


def test_hermitian_propagator_is_unitary():
    spec = LatticeSpec(sites=8)
    prop = propagate(spec, DriveProfile("slow_sine", 20.0), 0.0, 20.0)
    m = prop.matrix
    np.testing.assert_allclose(m.conj().T @ m, np.eye(8), atol=1e-10)
    assert abs(prop.log_scale) <= 1e-10


def test_uniform_decay_goes_entirely_into_log_scale():
    gamma, t = 0.8, 37.0
    dim = 5

    def hs(ts):
        return np.broadcast_to(-0.5j * gamma * np.eye(dim), (len(ts), dim, dim))

    prop = propagate_hamiltonian(hs, dim, 0.0, t, 1e-2)
    np.testing.assert_allclose(prop.matrix, np.eye(dim), atol=1e-10)
    assert abs(prop.log_scale - (-gamma * t / 2)) <= 1e-10


def test_unit_spectral_norm_and_finiteness_past_ep():
    for shape in ("slow_sine", "sudden"):
        prop = full_propagator(LatticeSpec(sites=20, gamma=2.5, delta=0.5), DriveProfile(shape, 500.0))
        assert np.all(np.isfinite(prop.matrix))
        assert abs(np.linalg.norm(prop.matrix, 2) - 1.0) < 1e-12
        assert prop.log_scale > 50  # would overflow a plain double product of this size soon


def test_composition():
    spec = LatticeSpec(sites=6, gamma=2.1, delta=0.2)
    profile = DriveProfile("slow_sine", 10.0)
    whole = propagate(spec, profile, 0.0, 10.0, 1e-2)
    parts = propagate(spec, profile, 0.0, 4.0, 1e-2).then(propagate(spec, profile, 4.0, 10.0, 1e-2))
    assert abs(whole.log_scale - parts.log_scale) < 1e-9
    np.testing.assert_allclose(parts.matrix, whole.matrix, atol=1e-9)


def test_rescaled_is_same_operator():
    prop = propagate(LatticeSpec(sites=4, gamma=1.0), DriveProfile("sudden", 3.0), 0.0, 3.0)
    other = prop.rescaled(3.7)
    np.testing.assert_allclose(other.effective(), prop.effective(), rtol=1e-13)


def test_propagate_rejects_bad_input():
    spec, profile = LatticeSpec(sites=2), DriveProfile("sudden", 1.0)
    with pytest.raises(ValidationError):
        propagate(spec, profile, 0.5, 0.5)
    with pytest.raises(ValidationError):
        propagate(spec, profile, 0.0, 1.0, dt=0.0)
    with pytest.raises(ValidationError):
        propagate(spec, profile, 0.0, 2.0)


def test_step_halving_convergence_short_drive():
    spec = LatticeSpec(sites=8, gamma=2.1)
    profile = DriveProfile("slow_sine", 50.0)
    a = propagate(spec, profile, 0.0, 50.0, 1e-2)
    b = propagate(spec, profile, 0.0, 50.0, 5e-3)
    rel = np.linalg.norm(a.matrix * np.exp(a.log_scale - b.log_scale) - b.matrix) / np.linalg.norm(b.matrix)
    assert rel < 1e-6


def test_evolve_density_hermitian_thermal():
    spec = LatticeSpec(sites=8)
    rho0 = thermal_state(build_h0(spec), 0.7)
    rho = evolve_density(spec, DriveProfile("sudden", 5.0), rho0)
    assert abs(np.trace(rho) - 1) < 1e-10
    np.testing.assert_allclose(np.linalg.eigvalsh(rho), np.linalg.eigvalsh(rho0), atol=1e-9)


def test_pure_state_stays_pure():
    spec = LatticeSpec(sites=6, gamma=2.1, delta=0.3)
    psi = np.arange(1, 7) + 1j * np.arange(6)
    psi /= np.linalg.norm(psi)
    rho = evolve_density(spec, DriveProfile("slow_sine", 30.0), np.outer(psi, psi.conj()))
    assert abs(purity(rho) - 1) < 1e-9
    assert abs(np.trace(rho) - 1) < 1e-10
    assert np.linalg.eigvalsh(rho).min() > -1e-10


def test_maximally_mixed_purifies_past_ep():
    spec = LatticeSpec(sites=6, gamma=2.1)
    rho0 = np.eye(6) / 6
    rho = evolve_density(spec, DriveProfile("sudden", 10.0), rho0)
    assert purity(rho) > purity(rho0) + 1e-3


def test_naive_tpm_hermitian_agrees():
    rho, rho_t = naive_tpm_state(LatticeSpec(sites=6), DriveProfile("slow_sine", 5.0), 1.3)
    np.testing.assert_allclose(rho, rho_t, atol=1e-10)


def test_naive_tpm_differs_when_nonhermitian():
    rho, rho_t = naive_tpm_state(LatticeSpec(sites=4, gamma=1.0), DriveProfile("sudden", 2.0), 1.0)
    assert abs(np.trace(rho) - 1) < 1e-12 and abs(np.trace(rho_t) - 1) < 1e-12
    assert trace_distance(rho, rho_t) > 1e-3


def test_naive_tpm_uniform_decay_at_infinite_temperature():
    dim = 4
    h0 = build_h0(LatticeSpec(sites=dim))

    def hs(ts):
        return np.broadcast_to(h0 - 0.3j * np.eye(dim), (len(ts), dim, dim))

    prop = propagate_hamiltonian(hs, dim, 0.0, 3.0)
    np.testing.assert_allclose(prop.matrix.conj().T @ prop.matrix, np.eye(dim), atol=1e-10)
    assert prop.log_scale == pytest.approx(-0.9, abs=1e-10)
    rho, rho_t = naive_tpm_from_propagator(prop, h0, 0.0)
    np.testing.assert_allclose(rho, rho_t, atol=1e-10)


@pytest.mark.parametrize("shape", ["slow_sine", "sudden"])
def test_multi_round_composition_matches_direct_run(shape):
    from nhwork.evolve import full_propagator

    spec = LatticeSpec(sites=8, gamma=2.1, delta=0.3)
    profile = DriveProfile(shape, 5.0, 3)
    a = full_propagator(spec, profile)
    b = propagate(spec, profile, 0.0, profile.t_final)
    assert np.max(np.abs(a.matrix - b.matrix)) <= 1e-12
    assert a.log_scale == pytest.approx(b.log_scale, abs=1e-10)
    assert (a.t_start, a.t_end) == (0.0, 15.0)
