"""Brute-force checks of the purified work statistics.

Two independent constructions are provided.  ``bath_tensor_simulation``
builds the purified system (x) bath state explicitly and projects it onto
the final measurement basis.  ``unitary_dilation_check`` realizes the
non-Hermitian evolution as a sequence of unitaries on system (x) ancilla,
one fresh qubit ancilla per coarse segment, and post-selects every ancilla
on its reference level.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from nhwork.errors import ExtinctionError, NumericalError, ValidationError
from nhwork.evolve import DEFAULT_DT, ScaledPropagator, propagate
from nhwork.model import DriveProfile, LatticeSpec, build_h0, eigenbasis
from nhwork.workstats import TransitionTable

MAX_TENSOR_SITES = 12
MAX_DILATION_SITES = 4
MAX_DILATION_STEPS = 4
PSD_FLOOR = -1e-12


@dataclass(frozen=True, eq=False)
class DilationReport:
    """Outcome of the post-selected dilation.

    ``prefactor`` is ``1 / survival_probability``: the factor that turns the
    unnormalized observed-space statistics into the normalized table.
    ``log_kernel_norms`` holds ``log sigma_max`` of every segment kernel
    before it was rescaled to a contraction.
    """

    survival_probability: float
    conditional_table: TransitionTable
    prefactor: float
    max_unitarity_defect: float
    log_kernel_norms: tuple = ()


def bath_labels(dim: int) -> np.ndarray:
    """Fixed orthonormal bath label vectors (columns of the unitary DFT)."""
    k = np.arange(dim)
    return np.exp(2j * np.pi * np.outer(k, k) / dim) / np.sqrt(dim)


def _plain_gibbs(energies: np.ndarray, beta: float) -> np.ndarray:
    if not np.isfinite(beta) or beta < 0:
        raise ValidationError(f"beta must be finite and non-negative, got {beta}")
    x = np.exp(-beta * (energies - energies.min()))
    return x / x.sum()


def _table(energies, probs, beta) -> TransitionTable:
    with np.errstate(divide="ignore"):
        log_p = np.log(probs)
    return TransitionTable(np.asarray(energies, dtype=float), probs, float(beta), 0.0, log_p)


def bath_tensor_simulation(
    spec: LatticeSpec,
    profile: DriveProfile,
    beta: float,
    dt: float = DEFAULT_DT,
) -> TransitionTable:
    """Explicit ``L^2``-amplitude simulation of the purified state.

    ``|Psi> = sum_n C_n |n> (x) |b_n>`` is evolved with ``U (x) 1`` and each
    joint probability is the squared overlap with ``|m> (x) |b_n>`` over the
    squared norm of the evolved state.
    """
    size = spec.sites
    if size > MAX_TENSOR_SITES:
        raise ValidationError(f"bath tensor simulation is limited to {MAX_TENSOR_SITES} sites")
    energies, vectors = eigenbasis(build_h0(spec))
    c = np.sqrt(_plain_gibbs(energies, beta))
    labels = bath_labels(size)

    psi = sum(c[n] * np.kron(vectors[:, n], labels[:, n]) for n in range(size))
    u = propagate(spec, profile, 0.0, profile.t_final, dt).matrix
    evolved = np.kron(u, np.eye(size)) @ psi
    norm2 = np.vdot(evolved, evolved).real
    if norm2 <= 0 or not np.isfinite(norm2):
        raise ExtinctionError("evolved purified state has zero norm")

    probs = np.empty((size, size))
    for m in range(size):
        for n in range(size):
            outcome = np.kron(vectors[:, m], labels[:, n])
            probs[m, n] = abs(np.vdot(outcome, evolved)) ** 2 / norm2
    return _table(energies, probs, beta)


def psd_sqrt(a: np.ndarray) -> np.ndarray:
    """Square root of a Hermitian PSD matrix; tiny negative eigenvalues are clipped."""
    a = 0.5 * (a + a.conj().T)
    vals, vecs = np.linalg.eigh(a)
    if vals.min() < PSD_FLOOR:
        raise NumericalError(f"residual is not positive semidefinite (min eig {vals.min():.3g})")
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.conj().T


def contraction_dilation(k: np.ndarray) -> np.ndarray:
    """Unitary ``[[K, (1 - K K^dag)^1/2], [(1 - K^dag K)^1/2, -K^dag]]`` for ``||K|| <= 1``.

    The first block row/column is the ancilla reference level.  Both
    residual square roots come from one SVD ``K = W S V^dag`` so that the
    off-diagonal blocks of ``V^dag V`` cancel to rounding even when
    ``sigma_max(K) = 1`` exactly.
    """
    w, s, vh = np.linalg.svd(k)
    residual = 1.0 - s**2
    if residual.min() < PSD_FLOOR:
        raise NumericalError(f"kernel is not a contraction (1 - s^2 = {residual.min():.3g})")
    root = np.sqrt(np.clip(residual, 0.0, None))
    v = vh.conj().T
    d = (w * root) @ w.conj().T
    d_prime = (v * root) @ v.conj().T
    return np.block([[k, d], [d_prime, -k.conj().T]])


def postselect(kernels: Sequence[np.ndarray], state: np.ndarray, margin: float = 1.0):
    """Run ``state`` (shape ``(dim, ...)``) through dilated kernels and post-select.

    Each kernel is divided by ``margin * sigma_max`` and dilated onto a fresh
    ancilla.  Returns ``(conditional_state, dilations)`` where the
    conditional state is the unnormalized reference-level component.
    """
    if margin < 1.0:
        raise ValidationError("margin must be >= 1")
    n = len(kernels)
    dim = state.shape[0]
    rest = state.shape[1:]
    # axes: ancillas (one per kernel) then system then the rest
    full = np.zeros((2,) * n + state.shape, dtype=complex)
    full[(0,) * n] = state
    dilations = []
    for j, k in enumerate(kernels):
        sigma = np.linalg.norm(k, 2)
        if sigma == 0 or not np.isfinite(sigma):
            raise NumericalError("segment kernel has zero or non-finite norm")
        v = contraction_dilation(k / (margin * sigma))
        dilations.append(v)
        v4 = v.reshape(2, dim, 2, dim)
        moved = np.moveaxis(full, [j, n], [0, 1])
        moved = np.tensordot(v4, moved, axes=([2, 3], [0, 1]))
        full = np.moveaxis(moved, [0, 1], [j, n])
    conditional = full[(0,) * n]
    assert conditional.shape == (dim,) + rest
    return conditional, dilations


def dilation_from_kernels(
    kernels: Sequence[np.ndarray],
    energies: np.ndarray,
    vectors: np.ndarray,
    beta: float,
    margin: float = 1.0,
    log_scales: Sequence[float] = (),
) -> DilationReport:
    """Post-selected transition table for the purified Gibbs state.

    ``log_scales`` are extra log-magnitudes carried alongside the kernels
    (from scaled propagators); they only enter ``log_kernel_norms``.
    """
    dim = len(energies)
    c = np.sqrt(_plain_gibbs(np.asarray(energies, dtype=float), beta))
    labels = np.eye(dim)
    # psi[s, b] = sum_n C_n vectors[s, n] labels[b, n]
    psi = (vectors * c) @ labels.T
    conditional, dilations = postselect(kernels, psi.astype(complex), margin)
    survival = float(np.sum(np.abs(conditional) ** 2))
    if survival <= 0:
        raise ExtinctionError("post-selection never succeeds")
    amps = vectors.conj().T @ conditional @ labels.conj()
    probs = np.abs(amps) ** 2 / survival
    defect = max(
        float(np.max(np.abs(v.conj().T @ v - np.eye(v.shape[0])))) for v in dilations
    )
    extra = list(log_scales) or [0.0] * len(kernels)
    log_norms = tuple(float(np.log(np.linalg.norm(k, 2))) + c for k, c in zip(kernels, extra))
    return DilationReport(survival, _table(energies, probs, beta), 1.0 / survival, defect, log_norms)


def segment_kernels(
    spec: LatticeSpec,
    profile: DriveProfile,
    n_steps: int,
    dt_inner: float = DEFAULT_DT,
) -> List[ScaledPropagator]:
    """Scaled propagators of ``n_steps`` equal segments of the drive."""
    edges = np.linspace(0.0, profile.t_final, n_steps + 1)
    return [propagate(spec, profile, float(a), float(b), dt_inner) for a, b in zip(edges[:-1], edges[1:])]


def unitary_dilation_check(
    spec: LatticeSpec,
    profile: DriveProfile,
    n_steps: int,
    beta: float,
    dt_inner: float = DEFAULT_DT,
    margin: float = 1.0,
) -> DilationReport:
    """Observed-space statistics of a coarse-step unitary dilation of the drive."""
    if spec.sites > MAX_DILATION_SITES:
        raise ValidationError(f"dilation check is limited to {MAX_DILATION_SITES} sites")
    if not 1 <= n_steps <= MAX_DILATION_STEPS:
        raise ValidationError(f"n_steps must be in [1, {MAX_DILATION_STEPS}]")
    energies, vectors = eigenbasis(build_h0(spec))
    segments = segment_kernels(spec, profile, n_steps, dt_inner)
    return dilation_from_kernels(
        [seg.matrix for seg in segments], energies, vectors, beta, margin,
        log_scales=[seg.log_scale for seg in segments],
    )
