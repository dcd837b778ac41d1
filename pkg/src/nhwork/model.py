"""Single-excitation matrices of the driven non-Hermitian SSH chain.

Sites are 0-based; unit cell ``k`` holds sites ``(2k, 2k+1)`` and sublattice
A is the even sites.  Energies are in units of the intra-cell hopping ``g1``
and times in units of ``1/g1`` (hbar = 1).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import FrozenSet, Tuple

import numpy as np
from scipy.special import logsumexp

from nhwork.errors import ValidationError

NONRECIPROCAL = "nonreciprocal"
LOSS_GAIN = "loss_gain"
ALL_TERMS = frozenset({NONRECIPROCAL, LOSS_GAIN})

OPEN = "open"
PERIODIC = "periodic"

SLOW_SINE = "slow_sine"
SUDDEN = "sudden"


@dataclass(frozen=True)
class LatticeSpec:
    """Parameters of the SSH chain and the active non-Hermitian terms."""

    sites: int = 20
    g1: float = 1.0
    g2: float = 1.5
    gamma: float = 0.0
    delta: float = 0.0
    boundary: str = OPEN
    terms: FrozenSet[str] = field(default=ALL_TERMS)

    def __post_init__(self):
        object.__setattr__(self, "terms", frozenset(self.terms))
        if isinstance(self.sites, bool) or int(self.sites) != self.sites:
            raise ValidationError(f"sites must be an integer, got {self.sites!r}")
        object.__setattr__(self, "sites", int(self.sites))
        if self.sites < 2:
            raise ValidationError(f"sites must be >= 2, got {self.sites}")
        if self.sites % 2:
            raise ValidationError(f"sites must be even, got {self.sites}")
        for name in ("g1", "g2", "gamma", "delta"):
            value = float(getattr(self, name))
            if not np.isfinite(value):
                raise ValidationError(f"{name} must be finite")
            object.__setattr__(self, name, value)
        if self.g1 <= 0:
            raise ValidationError(f"g1 must be positive, got {self.g1}")
        for name in ("g2", "gamma", "delta"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be non-negative")
        if self.boundary not in (OPEN, PERIODIC):
            raise ValidationError(f"unknown boundary {self.boundary!r}")
        unknown = self.terms - ALL_TERMS
        if unknown:
            raise ValidationError(f"unknown terms: {sorted(unknown)}")

    def replace(self, **changes) -> "LatticeSpec":
        return dataclasses.replace(self, **changes)

    @property
    def hermitian(self) -> bool:
        """True when no active non-Hermitian term has a nonzero strength."""
        nr = NONRECIPROCAL in self.terms and self.gamma != 0.0
        lg = LOSS_GAIN in self.terms and self.delta != 0.0
        return not (nr or lg)


@dataclass(frozen=True)
class DriveProfile:
    """Control function ``f(t)`` switching the non-Hermitian terms on and off.

    ``slow_sine`` repeats ``sin(pi t / t_total)`` on every round; ``sudden``
    holds ``f = 1`` over the whole window.
    """

    shape: str = SLOW_SINE
    t_total: float = 500.0
    rounds: int = 1

    def __post_init__(self):
        if self.shape not in (SLOW_SINE, SUDDEN):
            raise ValidationError(f"unknown drive shape {self.shape!r}")
        t_total = float(self.t_total)
        if not np.isfinite(t_total) or t_total <= 0:
            raise ValidationError(f"t_total must be positive, got {self.t_total}")
        object.__setattr__(self, "t_total", t_total)
        if isinstance(self.rounds, bool) or int(self.rounds) != self.rounds or self.rounds < 1:
            raise ValidationError(f"rounds must be a positive integer, got {self.rounds!r}")
        object.__setattr__(self, "rounds", int(self.rounds))

    def replace(self, **changes) -> "DriveProfile":
        return dataclasses.replace(self, **changes)

    @property
    def t_final(self) -> float:
        return self.rounds * self.t_total

    def value(self, t):
        """Evaluate ``f(t)``; accepts scalars or arrays."""
        t = np.asarray(t, dtype=float)
        inside = (t >= 0.0) & (t <= self.t_final)
        if self.shape == SUDDEN:
            out = np.where(inside, 1.0, 0.0)
        else:
            # exact zeros at every round boundary
            phase = np.mod(t, self.t_total) / self.t_total
            out = np.where(inside, np.sin(np.pi * phase), 0.0)
        return out if out.ndim else float(out)


def _check(spec: LatticeSpec):
    if not isinstance(spec, LatticeSpec):
        raise ValidationError(f"expected LatticeSpec, got {type(spec).__name__}")


def build_h0(spec: LatticeSpec) -> np.ndarray:
    """Hermitian SSH hopping matrix with intra-cell ``g1`` and inter-cell ``g2``."""
    _check(spec)
    size = spec.sites
    h = np.zeros((size, size), dtype=complex)
    for a in range(0, size, 2):
        h[a, a + 1] += spec.g1
        h[a + 1, a] += spec.g1
        nxt = a + 2
        if nxt >= size:
            if spec.boundary != PERIODIC:
                continue
            nxt = 0
        h[a + 1, nxt] += spec.g2
        h[nxt, a + 1] += spec.g2
    return h


def build_h_nr(spec: LatticeSpec) -> np.ndarray:
    """Nonreciprocal intra-cell term: ``+gamma/2`` on (2n, 2n+1), ``-gamma/2`` on the transpose."""
    _check(spec)
    size = spec.sites
    h = np.zeros((size, size), dtype=complex)
    half = 0.5 * spec.gamma
    for a in range(0, size, 2):
        h[a, a + 1] = half
        h[a + 1, a] = -half
    return h


def build_h_lg(spec: LatticeSpec) -> np.ndarray:
    """Loss/gain term: ``+i delta`` on sublattice A, ``-i delta`` on sublattice B."""
    _check(spec)
    signs = np.where(np.arange(spec.sites) % 2 == 0, 1.0, -1.0)
    return np.diag(1j * spec.delta * signs)


def nonhermitian_part(spec: LatticeSpec) -> np.ndarray:
    """Sum of the active non-Hermitian terms at full strength (``f = 1``)."""
    v = np.zeros((spec.sites, spec.sites), dtype=complex)
    if NONRECIPROCAL in spec.terms:
        v += build_h_nr(spec)
    if LOSS_GAIN in spec.terms:
        v += build_h_lg(spec)
    return v


def hamiltonian_at(spec: LatticeSpec, profile: DriveProfile, t: float) -> np.ndarray:
    """``H(t) = H0 + f(t) * (active non-Hermitian terms)``."""
    if t < 0:
        raise ValidationError(f"t must be non-negative, got {t}")
    h = build_h0(spec)
    f = profile.value(t)
    if f != 0.0:
        h = h + f * nonhermitian_part(spec)
    return h


def eigenbasis(h0: np.ndarray, degeneracy_tol: float = 1e-10) -> Tuple[np.ndarray, np.ndarray]:
    """Eigenpairs of a Hermitian matrix with a reproducible gauge.

    Eigenvalues come out ascending.  Within each degenerate cluster the
    vectors are re-orthonormalized, and every vector is given a phase that
    makes its first non-negligible component real and positive.
    """
    energies, vectors = np.linalg.eigh(h0)
    vectors = vectors.astype(complex)
    scale = max(1.0, float(np.max(np.abs(energies))))
    start = 0
    size = len(energies)
    while start < size:
        stop = start + 1
        while stop < size and energies[stop] - energies[stop - 1] <= degeneracy_tol * scale:
            stop += 1
        if stop - start > 1:
            q, _ = np.linalg.qr(vectors[:, start:stop])
            vectors[:, start:stop] = q
            energies[start:stop] = np.mean(energies[start:stop])
        start = stop
    for k in range(size):
        col = vectors[:, k]
        idx = int(np.argmax(np.abs(col) > 1e-12))
        vectors[:, k] = col * (abs(col[idx]) / col[idx])
    return energies, vectors


def log_gibbs_weights(energies, beta: float) -> np.ndarray:
    """``log(exp(-beta E_n) / Z)``, stable for any ``beta >= 0``."""
    if beta < 0 or not np.isfinite(beta):
        raise ValidationError(f"beta must be finite and non-negative, got {beta}")
    logits = -beta * np.asarray(energies, dtype=float)
    return logits - logsumexp(logits)


def gibbs_weights(energies, beta: float) -> np.ndarray:
    return np.exp(log_gibbs_weights(energies, beta))


def thermal_state(h0: np.ndarray, beta: float) -> np.ndarray:
    """Gibbs density matrix ``exp(-beta H0) / Z``."""
    energies, vectors = eigenbasis(h0)
    weights = gibbs_weights(energies, beta)
    rho = (vectors * weights) @ vectors.conj().T
    return 0.5 * (rho + rho.conj().T)
