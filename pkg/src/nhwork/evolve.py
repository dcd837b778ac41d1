"""Time-ordered propagators with a separated log-magnitude.

Past the exceptional point the propagator norm grows like ``exp(100)`` or
more over the default drive, so the stored matrix is kept at unit spectral
norm and the magnitude lives in ``log_scale``.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np
from scipy.linalg import expm

from nhwork.errors import ExtinctionError, NumericalError, ValidationError
from nhwork.model import (
    DriveProfile,
    LatticeSpec,
    build_h0,
    eigenbasis,
    gibbs_weights,
    nonhermitian_part,
    thermal_state,
)

DEFAULT_DT = 1e-2
CHUNK = 1024
# trace below this is treated as total extinction of the post-selected norm
EXTINCTION_FLOOR = 1e-250


@dataclass(frozen=True, eq=False)
class ScaledPropagator:
    """``U(t_end <- t_start) = exp(log_scale) * matrix``."""

    matrix: np.ndarray
    log_scale: float
    t_start: float
    t_end: float

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def effective(self) -> np.ndarray:
        """The unscaled propagator; raises if it does not fit in a double."""
        with np.errstate(over="ignore"):
            factor = np.exp(self.log_scale)
        if not np.isfinite(factor) or factor == 0.0:
            raise NumericalError(
                f"effective propagator out of range (log_scale={self.log_scale:.3g})"
            )
        return factor * self.matrix

    def rescaled(self, c: float) -> "ScaledPropagator":
        """Same operator with ``matrix * e^c`` and ``log_scale - c``."""
        return ScaledPropagator(self.matrix * np.exp(c), self.log_scale - c, self.t_start, self.t_end)

    def then(self, later: "ScaledPropagator") -> "ScaledPropagator":
        """Compose with a propagator that acts after this one."""
        product = later.matrix @ self.matrix
        norm = np.linalg.norm(product, 2)
        if not np.isfinite(norm) or norm == 0.0:
            raise NumericalError("composition produced a zero or non-finite matrix")
        return ScaledPropagator(
            _frozen(product / norm),
            self.log_scale + later.log_scale + float(np.log(norm)),
            self.t_start,
            later.t_end,
        )


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


def propagate_hamiltonian(
    hamiltonians: Callable[[np.ndarray], np.ndarray],
    dim: int,
    t0: float,
    t1: float,
    dt: float = DEFAULT_DT,
) -> ScaledPropagator:
    """Ordered product of midpoint exponentials ``exp(-i H(t_mid) h)``.

    ``hamiltonians`` maps an array of ``k`` times to a ``(k, dim, dim)``
    stack.  The interval is cut into ``ceil((t1 - t0) / dt)`` equal steps.
    Whenever the Frobenius norm of the running product leaves
    ``[1/e, e * sqrt(dim)]`` it is divided by its spectral norm and the log
    of that norm is added to ``log_scale``; the returned matrix always has
    unit spectral norm.  For a Hermitian generator the product is projected
    back onto the nearest unitary after every chunk, which stops rounding
    drift from accumulating coherently over long constant drives.
    """
    if not (dt > 0 and np.isfinite(dt)):
        raise ValidationError(f"dt must be positive, got {dt}")
    if not t1 > t0:
        raise ValidationError(f"need t1 > t0, got t0={t0}, t1={t1}")
    n_steps = max(1, int(np.ceil((t1 - t0) / dt - 1e-9)))
    h = (t1 - t0) / n_steps
    upper = np.e * np.sqrt(dim)
    lower = np.exp(-1.0)

    m = np.eye(dim, dtype=complex)
    log_scale = 0.0
    hermitian = True
    for start in range(0, n_steps, CHUNK):
        stop = min(start + CHUNK, n_steps)
        t_mid = t0 + (np.arange(start, stop) + 0.5) * h
        hs = np.asarray(hamiltonians(t_mid), dtype=complex)
        hermitian = hermitian and np.array_equal(hs, hs.conj().transpose(0, 2, 1))
        if np.all(hs == hs[0]):
            step = expm(-1j * h * hs[0])
            steps = (step for _ in range(stop - start))
        else:
            steps = expm(-1j * h * hs)
        for s in steps:
            m = s @ m
            fro = np.linalg.norm(m)
            if not lower <= fro <= upper:
                norm = np.linalg.norm(m, 2)
                if not np.isfinite(norm) or norm == 0.0:
                    raise NumericalError("propagator became zero or non-finite; reduce dt")
                m /= norm
                log_scale += float(np.log(norm))
        if not np.all(np.isfinite(m)):
            raise NumericalError("non-finite propagator entries; reduce dt")
        if hermitian:
            w, _, vh = np.linalg.svd(m)
            m = w @ vh

    norm = np.linalg.norm(m, 2)
    if not np.isfinite(norm) or norm == 0.0:
        raise NumericalError("propagator became zero or non-finite; reduce dt")
    return ScaledPropagator(_frozen(m / norm), log_scale + float(np.log(norm)), float(t0), float(t1))


def _stack(spec: LatticeSpec, profile: DriveProfile):
    h0 = build_h0(spec)
    v = nonhermitian_part(spec)

    def hamiltonians(ts):
        f = profile.value(np.asarray(ts, dtype=float))
        return h0[None, :, :] + np.asarray(f)[:, None, None] * v[None, :, :]

    return hamiltonians


def propagate(
    spec: LatticeSpec,
    profile: DriveProfile,
    t0: float,
    t1: float,
    dt: float = DEFAULT_DT,
) -> ScaledPropagator:
    """Propagator of the driven chain from ``t0`` to ``t1``."""
    if t0 < 0 or t1 > profile.t_final * (1 + 1e-12):
        raise ValidationError(
            f"interval [{t0}, {t1}] outside the drive window [0, {profile.t_final}]"
        )
    return propagate_hamiltonian(_stack(spec, profile), spec.sites, t0, t1, dt)


@functools.lru_cache(maxsize=64)
def full_propagator(spec: LatticeSpec, profile: DriveProfile, dt: float = DEFAULT_DT) -> ScaledPropagator:
    """Propagator over the whole drive, cached per ``(spec, profile, dt)``.

    The drive is periodic, so several rounds are one round composed with
    itself; the step grid matches a direct run whenever ``t_total / dt`` is
    an integer.
    """
    if profile.rounds == 1:
        return propagate(spec, profile, 0.0, profile.t_final, dt)
    single = full_propagator(spec, profile.replace(rounds=1), dt)
    out = single
    for k in range(1, profile.rounds):
        out = out.then(ScaledPropagator(single.matrix, single.log_scale, k * single.t_end, (k + 1) * single.t_end))
    return out


def transform(propagator: ScaledPropagator, rho: np.ndarray) -> np.ndarray:
    """``U rho U^dagger / Tr{U rho U^dagger}``; ``log_scale`` cancels."""
    m = propagator.matrix
    out = m @ rho @ m.conj().T
    trace = float(np.real(np.trace(out)))
    if not np.isfinite(trace) or trace <= EXTINCTION_FLOOR:
        raise ExtinctionError(f"normalization trace vanished ({trace:.3g})")
    out = out / trace
    return 0.5 * (out + out.conj().T)


def evolve_density(
    spec: LatticeSpec,
    profile: DriveProfile,
    rho0: np.ndarray,
    dt: float = DEFAULT_DT,
) -> np.ndarray:
    """Normalized non-Hermitian evolution of ``rho0`` over the full drive."""
    rho0 = np.asarray(rho0, dtype=complex)
    if rho0.shape != (spec.sites, spec.sites):
        raise ValidationError(f"rho0 must be {spec.sites}x{spec.sites}")
    return transform(full_propagator(spec, profile, dt), rho0)


def naive_tpm_state(
    spec: LatticeSpec,
    profile: DriveProfile,
    beta: float,
    dt: float = DEFAULT_DT,
) -> Tuple[np.ndarray, np.ndarray]:
    """Evolved thermal state with and without a first energy measurement.

    Returns ``(rho, rho_tilde)`` where ``rho_tilde`` averages the separately
    normalized evolutions of each measured eigenstate.  The two differ as
    soon as ``U^dagger U`` is not proportional to the identity.
    """
    return naive_tpm_from_propagator(full_propagator(spec, profile, dt), build_h0(spec), beta)


def naive_tpm_from_propagator(
    prop: ScaledPropagator, h0: np.ndarray, beta: float
) -> Tuple[np.ndarray, np.ndarray]:
    rho = transform(prop, thermal_state(h0, beta))
    energies, vectors = eigenbasis(h0)
    weights = gibbs_weights(energies, beta)
    evolved = prop.matrix @ vectors
    norms = np.sum(np.abs(evolved) ** 2, axis=0)
    keep = weights > 0
    if np.any(norms[keep] <= EXTINCTION_FLOOR):
        raise ExtinctionError("an initial eigenstate is fully extinguished")
    cols = evolved[:, keep] * np.sqrt(weights[keep] / norms[keep])
    rho_tilde = cols @ cols.conj().T
    rho_tilde = rho_tilde / np.real(np.trace(rho_tilde))
    return rho, 0.5 * (rho_tilde + rho_tilde.conj().T)


def purity(rho: np.ndarray) -> float:
    return float(np.real(np.trace(rho @ rho)))


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    d = a - b
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(0.5 * (d + d.conj().T)))))
