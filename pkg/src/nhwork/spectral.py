"""Biorthogonal eigen-decomposition and PT-phase diagnostics."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
import scipy.linalg
from scipy.optimize import linear_sum_assignment

from nhwork.errors import ValidationError
from nhwork.model import LatticeSpec, build_h0, nonhermitian_part

TOL_IMAG = 1e-7
# overlap matrices worse conditioned than this are treated as defective
SINGULAR_COND = 1e12


@dataclass(frozen=True, eq=False)
class SpectrumReport:
    """Eigenvalues sorted by (Re, Im) with paired right/left eigenvectors.

    Columns satisfy ``H psi_n = E_n psi_n``, ``H^dagger phi_n = conj(E_n) phi_n``
    and ``<phi_n|psi_m> = delta_nm`` when ``paired`` is true.  Right vectors
    have unit norm.  ``biorth_condition`` is ``max_n |phi_n| |psi_n|``, the
    eigenvalue condition number; it is 1 for Hermitian input and diverges at
    an exceptional point.
    """

    eigenvalues: np.ndarray
    right_vectors: np.ndarray
    left_vectors: np.ndarray
    biorth_condition: float
    pt_unbroken: bool
    paired: bool = True
    track_index: Optional[np.ndarray] = None

    @property
    def max_imag(self) -> float:
        return float(np.max(np.abs(self.eigenvalues.imag)))


def _clusters(values: np.ndarray, tol: float) -> List[np.ndarray]:
    """Group sorted complex values into chains of mutual distance <= tol."""
    groups = []
    used = np.zeros(len(values), dtype=bool)
    for i in range(len(values)):
        if used[i]:
            continue
        members = [i]
        used[i] = True
        k = 0
        while k < len(members):
            near = np.flatnonzero(~used & (np.abs(values - values[members[k]]) <= tol))
            used[near] = True
            members.extend(near.tolist())
            k += 1
        groups.append(np.array(sorted(members)))
    return groups


def diagonalize(h: np.ndarray, tol_imag: float = TOL_IMAG) -> SpectrumReport:
    """Right eigenvectors of ``H`` and left ones from ``H^dagger``, biorthonormalized.

    Left vectors are matched to right ones through conjugate eigenvalues.
    Inside a (near-)degenerate cluster the left block is replaced by
    ``phi (O^{-1})^dagger`` with ``O = phi^dagger psi``, which is the
    maximal-overlap pairing.  If the overlap is singular (an exact
    exceptional point) the report is flagged ``paired=False`` and the
    vectors are returned unit-normalized and unpaired.
    """
    h = np.asarray(h, dtype=complex)
    if not np.all(np.isfinite(h)):
        raise ValidationError("matrix has non-finite entries")
    w, vr = scipy.linalg.eig(h)
    wl, vl = scipy.linalg.eig(h.conj().T)

    order = np.lexsort((np.round(w.imag, 12), np.round(w.real, 12)))
    w, vr = w[order], vr[:, order]
    vr = vr / np.linalg.norm(vr, axis=0)

    # pair left eigenvalues (of H^dagger) with conj of right ones
    cost = np.abs(w[:, None] - np.conj(wl)[None, :])
    rows, cols = linear_sum_assignment(cost)
    vl = vl[:, cols[np.argsort(rows)]]
    vl = vl / np.linalg.norm(vl, axis=0)

    scale = 1.0 + float(np.max(np.abs(w)))
    paired = True
    left = vl.copy()
    for group in _clusters(w, 1e-8 * scale):
        overlap = vl[:, group].conj().T @ vr[:, group]
        sv = np.linalg.svd(overlap, compute_uv=False)
        if sv[-1] <= sv[0] / SINGULAR_COND:
            paired = False
            break
        left[:, group] = vl[:, group] @ np.linalg.inv(overlap).conj().T

    if paired:
        with np.errstate(over="ignore", invalid="ignore"):
            condition = float(np.max(np.linalg.norm(left, axis=0)))
        paired = bool(np.isfinite(condition) and condition < SINGULAR_COND)
    if not paired:
        left = vl
        condition = float("inf")
    unbroken = bool(np.max(np.abs(w.imag)) < tol_imag)
    return SpectrumReport(w, vr, left, max(condition, 1.0), unbroken, paired)


def full_hamiltonian(spec: LatticeSpec) -> np.ndarray:
    """``H0`` plus the active non-Hermitian terms at ``f = 1``."""
    return build_h0(spec) + nonhermitian_part(spec)


def _spec_at(spec: LatticeSpec, param: str, value: float, delta_ratio: Optional[float]):
    if param == "gamma":
        changes = {"gamma": value}
        if delta_ratio is not None:
            changes["delta"] = delta_ratio * value
        return spec.replace(**changes)
    if param == "delta":
        return spec.replace(delta=value)
    raise ValidationError(f"param must be 'gamma' or 'delta', got {param!r}")


def sweep_spectrum(
    spec: LatticeSpec,
    param: str,
    grid: Sequence[float],
    *,
    delta_ratio: Optional[float] = None,
    tol_imag: float = TOL_IMAG,
) -> List[SpectrumReport]:
    """Spectra of the ``f = 1`` Hamiltonian along a parameter grid.

    With ``param="gamma"`` and ``delta_ratio`` set, the loss/gain strength
    follows ``delta = delta_ratio * gamma``.  Each report carries
    ``track_index``: the continuous eigenvalue track of every sorted
    eigenvalue, found by nearest-neighbour assignment to the previous point.
    """
    grid = [float(g) for g in grid]
    if not grid:
        raise ValidationError("grid must be nonempty")
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ValidationError("grid must be sorted")
    reports = []
    prev = None
    for value in grid:
        rep = diagonalize(full_hamiltonian(_spec_at(spec, param, value, delta_ratio)), tol_imag)
        if prev is None:
            tracks = np.arange(len(rep.eigenvalues))
        else:
            cost = np.abs(prev.eigenvalues[:, None] - rep.eigenvalues[None, :])
            rows, cols = linear_sum_assignment(cost)
            tracks = np.empty(len(rep.eigenvalues), dtype=int)
            tracks[cols] = prev.track_index[rows]
        rep = SpectrumReport(
            rep.eigenvalues, rep.right_vectors, rep.left_vectors,
            rep.biorth_condition, rep.pt_unbroken, rep.paired, tracks,
        )
        reports.append(rep)
        prev = rep
    return reports


def locate_ep(
    spec: LatticeSpec,
    gamma_lo: float,
    gamma_hi: float,
    tol: float = 1e-6,
    *,
    delta_ratio: Optional[float] = None,
    tol_imag: float = TOL_IMAG,
    history: Optional[list] = None,
) -> float:
    """Bisect for the ``gamma`` where ``max |Im E|`` first exceeds ``tol_imag``.

    If ``history`` is a list, each probe is appended as
    ``(gamma, unbroken, biorth_condition)``.
    """

    def probe(g):
        rep = diagonalize(full_hamiltonian(_spec_at(spec, "gamma", g, delta_ratio)), tol_imag)
        if history is not None:
            history.append((g, rep.pt_unbroken, rep.biorth_condition))
        return rep.pt_unbroken

    lo, hi = float(gamma_lo), float(gamma_hi)
    if not lo < hi:
        raise ValidationError("need gamma_lo < gamma_hi")
    if not probe(lo) or probe(hi):
        raise ValidationError(
            f"bracket [{lo}, {hi}] must be PT-unbroken at the low end and broken at the high end"
        )
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if probe(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def pt_metric(report: SpectrumReport) -> np.ndarray:
    """``M = sum_n |phi_n><phi_n|``, which makes ``H`` self-adjoint in the unbroken phase."""
    if not report.pt_unbroken:
        raise ValidationError("metric is only defined in the PT-unbroken phase")
    if not report.paired:
        raise ValidationError("eigenvectors are not biorthogonally paired")
    phi = report.left_vectors
    m = phi @ phi.conj().T
    return 0.5 * (m + m.conj().T)
