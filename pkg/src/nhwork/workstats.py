"""Purified two-point-measurement work statistics.

The thermal state is purified with orthonormal bath labels, the system
factor evolves under the non-Hermitian propagator and the total state is
measured on ``|m(0)> (x) |bath_n(t_f)>``.  Because the labels stay
orthonormal and the bath unitary only contributes phases, the transition
probabilities reduce to

    P[m, n] = C_n^2 |<m|U|n>|^2 / N,    N = sum_n C_n^2 <n|U^dagger U|n>,

with ``C_n^2`` the Gibbs weights of ``H0``.  The work of each transition is
``E_m(0) - E_n(0)``.  Everything is evaluated in the log domain so that
``beta`` up to ``1000 / g1`` and propagator norms of ``exp(100)`` are safe.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp

from nhwork.errors import ExtinctionError, ValidationError
from nhwork.evolve import DEFAULT_DT, ScaledPropagator, evolve_density, full_propagator, propagate
from nhwork.model import (
    DriveProfile,
    LatticeSpec,
    build_h0,
    eigenbasis,
    gibbs_weights,
    log_gibbs_weights,
    thermal_state,
)

MERGE_TOL = 1e-8
# rounding noise on propagator entries, relative to its spectral norm
ROUNDING_NOISE = 1e-12
# probability mass allowed to rest on columns that rounding cannot resolve
MAX_UNRESOLVED_MASS = 1e-6


@dataclass(frozen=True, eq=False)
class TransitionTable:
    """Joint probabilities ``P[m, n]`` (row = final level, column = initial level).

    ``log_probabilities`` holds ``log P`` (``-inf`` for exact zeros) so that
    exponential averages can be formed without underflow.
    ``unresolved_mass`` bounds the probability whose value is set by
    rounding noise in the propagator rather than by the dynamics.
    """

    energies: np.ndarray
    probabilities: np.ndarray
    beta: float
    log_norm: float
    log_probabilities: np.ndarray
    unresolved_mass: float = 0.0

    @property
    def work_values(self) -> np.ndarray:
        """``W[m, n] = E_m - E_n``."""
        return self.energies[:, None] - self.energies[None, :]

    @property
    def initial_marginal(self) -> np.ndarray:
        return self.probabilities.sum(axis=0)

    @property
    def final_marginal(self) -> np.ndarray:
        return self.probabilities.sum(axis=1)


@dataclass(frozen=True, eq=False)
class WorkDistribution:
    """Discrete work atoms with strictly increasing ``w``."""

    w: np.ndarray
    p: np.ndarray
    merge_tol: float

    @property
    def atoms(self):
        return list(zip(self.w.tolist(), self.p.tolist()))


def _validate_beta(beta: float) -> float:
    beta = float(beta)
    if not np.isfinite(beta) or beta < 0:
        raise ValidationError(f"beta must be finite and non-negative, got {beta}")
    return beta


def table_from_propagator(
    propagator: ScaledPropagator,
    energies: np.ndarray,
    vectors: np.ndarray,
    beta: float,
) -> TransitionTable:
    """Purified transition table for a given propagator and ``H0`` eigenbasis.

    Raises
    ------
    ExtinctionError
        If the normalization vanishes, or if more than
        ``MAX_UNRESOLVED_MASS`` of the probability rests on initial levels
        whose evolved norm has sunk to the rounding floor of the stored
        propagator.  This happens when a symmetry keeps a thermally
        dominant level away from the fastest-growing modes.
    """
    beta = _validate_beta(beta)
    kernel = vectors.conj().T @ propagator.matrix @ vectors
    amp2 = np.abs(kernel) ** 2
    column = amp2.sum(axis=0)
    log_c2 = log_gibbs_weights(energies, beta)
    with np.errstate(divide="ignore"):
        log_col = np.log(column)
        log_weight = log_c2 + log_col
        log_n = logsumexp(log_weight)
        if not np.isfinite(log_n):
            raise ExtinctionError("purified normalization vanished")
        safe_col = np.where(column > 0, column, 1.0)
        log_p = (log_weight - log_n)[None, :] + np.log(amp2) - np.log(safe_col)[None, :]
        floor = ROUNDING_NOISE * np.linalg.norm(propagator.matrix, 2)
        noise = 2.0 * floor * np.sqrt(column) + floor**2
        unresolved = float(np.exp(logsumexp(log_c2 + np.log(noise)) - log_n))
    if unresolved > MAX_UNRESOLVED_MASS:
        raise ExtinctionError(
            f"thermally weighted levels are lost to rounding (unresolved mass {unresolved:.2g}); "
            "shorten the drive or lower beta"
        )
    log_p = np.where(amp2 > 0, log_p, -np.inf)
    probs = np.exp(log_p)
    return TransitionTable(
        energies=np.asarray(energies, dtype=float),
        probabilities=probs,
        beta=beta,
        log_norm=float(log_n + 2.0 * propagator.log_scale),
        log_probabilities=log_p,
        unresolved_mass=unresolved,
    )


def purified_transition_table(
    spec: LatticeSpec,
    profile: DriveProfile,
    beta: float,
    dt: float = DEFAULT_DT,
    *,
    basis: Optional[Tuple[np.ndarray, np.ndarray]] = None,
) -> TransitionTable:
    """Work statistics of the purified system+bath state.

    ``basis`` overrides the ``(energies, vectors)`` eigenbasis of ``H0``;
    only useful for checking basis independence in degenerate spectra.
    """
    beta = _validate_beta(beta)
    if basis is None:
        basis = eigenbasis(build_h0(spec))
    energies, vectors = basis
    return table_from_propagator(full_propagator(spec, profile, dt), energies, vectors, beta)


def hermitian_tpm(
    spec: LatticeSpec,
    profile: DriveProfile,
    beta: float,
    dt: float = DEFAULT_DT,
) -> TransitionTable:
    """Ordinary two-point measurement with the non-Hermitian terms switched off."""
    beta = _validate_beta(beta)
    spec = spec.replace(gamma=0.0, delta=0.0)
    energies, vectors = eigenbasis(build_h0(spec))
    prop = full_propagator(spec, profile, dt)
    u = vectors.conj().T @ prop.effective() @ vectors
    amp2 = np.abs(u) ** 2
    log_c2 = log_gibbs_weights(energies, beta)
    with np.errstate(divide="ignore"):
        log_p = log_c2[None, :] + np.log(amp2)
    return TransitionTable(energies, np.exp(log_p), beta, 0.0, log_p)


def work_distribution(table: TransitionTable, merge_tol: float = MERGE_TOL) -> WorkDistribution:
    """Collapse ``P[m, n]`` onto distinct work values.

    Sorted work values closer than ``merge_tol`` to a neighbour are chained
    into one atom placed at the probability-weighted mean of its members.
    """
    w = table.work_values.ravel()
    p = table.probabilities.ravel()
    order = np.argsort(w, kind="stable")
    w, p = w[order], p[order]
    breaks = np.flatnonzero(np.diff(w) > merge_tol) + 1
    starts = np.concatenate(([0], breaks))
    mass = np.add.reduceat(p, starts)
    first_moment = np.add.reduceat(w * p, starts)
    counts = np.diff(np.concatenate((starts, [len(w)])))
    plain_mean = np.add.reduceat(w, starts) / counts
    with np.errstate(invalid="ignore", divide="ignore"):
        centre = np.where(mass > 0, first_moment / mass, plain_mean)
    return WorkDistribution(centre, mass, float(merge_tol))


def characteristic_function(table: TransitionTable, u_grid: Sequence[complex]) -> np.ndarray:
    """``chi(u) = sum_{m,n} exp(i u (E_m - E_n)) P[m, n]``.

    ``u`` may be complex; ``chi(i beta)`` is the Jarzynski average
    ``<exp(-beta W)>`` and is evaluated without overflow.
    """
    w = table.work_values.ravel()
    log_p = table.log_probabilities.ravel()
    keep = np.isfinite(log_p)
    w, log_p = w[keep], log_p[keep]
    out = []
    for u in np.atleast_1d(np.asarray(u_grid, dtype=complex)):
        exponent = log_p + 1j * u * w
        shift = np.max(exponent.real)
        out.append(np.exp(shift) * np.sum(np.exp(exponent - shift)))
    return np.array(out)


def jarzynski_estimator(table: TransitionTable) -> float:
    """``<exp(-beta W)>`` over the table."""
    return float(np.real(characteristic_function(table, [1j * table.beta])[0]))


def moments(dist: WorkDistribution) -> Tuple[float, float]:
    """Mean work and ``<dW^2> = sum_w P(w) (w - W_ave)^2``."""
    mean = float(np.sum(dist.w * dist.p))
    var = float(np.sum(dist.p * (dist.w - mean) ** 2))
    return mean, var


def system_energy_change(
    spec: LatticeSpec,
    profile: DriveProfile,
    beta: float,
    dt: float = DEFAULT_DT,
) -> float:
    """``Tr{H0 rho(t_f)} - Tr{H0 rho_0}`` under the normalized evolution."""
    beta = _validate_beta(beta)
    h0 = build_h0(spec)
    rho0 = thermal_state(h0, beta)
    rho_f = evolve_density(spec, profile, rho0, dt)
    return float(np.real(np.trace(h0 @ rho_f) - np.trace(h0 @ rho0)))


def bath_populations(
    spec: LatticeSpec,
    profile: DriveProfile,
    beta: float,
    t: float,
    dt: float = DEFAULT_DT,
) -> np.ndarray:
    """Bath-label weights ``C_n^2 <n|U^dagger(t) U(t)|n> / N(t)``."""
    beta = _validate_beta(beta)
    energies, vectors = eigenbasis(build_h0(spec))
    if t == 0:
        return gibbs_weights(energies, beta)
    prop = propagate(spec, profile, 0.0, t, dt)
    column = np.sum(np.abs(prop.matrix @ vectors) ** 2, axis=0)
    with np.errstate(divide="ignore"):
        log_weight = log_gibbs_weights(energies, beta) + np.log(column)
    log_n = logsumexp(log_weight)
    if not np.isfinite(log_n):
        raise ExtinctionError("bath normalization vanished")
    return np.exp(log_weight - log_n)
