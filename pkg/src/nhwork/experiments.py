"""Experiment configuration and the runners behind the CLI subcommands."""

from __future__ import annotations

import dataclasses
import itertools
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from nhwork import oracle, spectral, workstats
from nhwork.errors import ValidationError
from nhwork.evolve import DEFAULT_DT
from nhwork.io import Table
from nhwork.model import SLOW_SINE, SUDDEN, DriveProfile, LatticeSpec

EXPERIMENTS = ("spectrum_sweep", "work_distribution", "beta_sweep", "verify")
FORMATS = ("csv", "json")
VERIFY_SUBSETS = ("all", "hermitian")

DEFAULT_BETAS = [float(b) for b in np.logspace(-1, 3, 25)]
DEFAULT_GAMMAS = [1.9, 2.1]


@dataclass
class ExperimentConfig:
    experiment: str = "beta_sweep"
    lattice: LatticeSpec = field(default_factory=LatticeSpec)
    drive_shapes: List[str] = field(default_factory=lambda: [SLOW_SINE])
    t_total: float = 500.0
    rounds: List[int] = field(default_factory=lambda: [1])
    beta_grid: List[float] = field(default_factory=lambda: list(DEFAULT_BETAS))
    gamma_grid: Optional[List[float]] = field(default_factory=lambda: list(DEFAULT_GAMMAS))
    delta_grid: Optional[List[float]] = None
    delta_ratio_grid: Optional[List[float]] = None
    dt: float = DEFAULT_DT
    merge_tol: float = workstats.MERGE_TOL
    output_path: Optional[str] = None
    output_format: str = "csv"
    verify_subset: str = "all"

    def validate(self) -> "ExperimentConfig":
        if self.experiment not in EXPERIMENTS:
            raise ValidationError(f"experiment: must be one of {EXPERIMENTS}, got {self.experiment!r}")
        if self.output_format not in FORMATS:
            raise ValidationError(f"output_format: must be one of {FORMATS}")
        if self.verify_subset not in VERIFY_SUBSETS:
            raise ValidationError(f"verify_subset: must be one of {VERIFY_SUBSETS}")
        if not (self.dt > 0 and np.isfinite(self.dt)):
            raise ValidationError(f"dt: must be positive, got {self.dt}")
        if not self.merge_tol >= 0:
            raise ValidationError("merge_tol: must be non-negative")
        for name in ("beta_grid", "gamma_grid", "delta_grid", "delta_ratio_grid"):
            grid = getattr(self, name)
            if grid is None:
                continue
            if len(grid) == 0:
                raise ValidationError(f"{name}: must be nonempty when present")
            if any(not np.isfinite(g) for g in grid):
                raise ValidationError(f"{name}: entries must be finite")
            if any(b < a for a, b in zip(grid, grid[1:])):
                raise ValidationError(f"{name}: must be sorted ascending")
        if any(b < 0 for b in self.beta_grid):
            raise ValidationError("beta_grid: entries must be non-negative")
        if self.delta_grid is not None and self.delta_ratio_grid is not None:
            raise ValidationError("delta_grid and delta_ratio_grid are mutually exclusive")
        for shape in self.drive_shapes:
            if shape not in (SLOW_SINE, SUDDEN):
                raise ValidationError(f"drive.shape: unknown shape {shape!r}")
        for r in self.rounds:
            DriveProfile(SLOW_SINE, self.t_total, r)
        DriveProfile(SLOW_SINE, self.t_total, 1)
        return self

    def profiles(self) -> List[DriveProfile]:
        return [DriveProfile(s, self.t_total, r) for s in self.drive_shapes for r in self.rounds]

    def lattice_points(self) -> List[LatticeSpec]:
        """Specs in grid order: gamma outer, delta inner."""
        gammas = self.gamma_grid if self.gamma_grid is not None else [self.lattice.gamma]
        out = []
        for g in gammas:
            if self.delta_ratio_grid is not None:
                deltas = [r * g for r in self.delta_ratio_grid]
            elif self.delta_grid is not None:
                deltas = self.delta_grid
            else:
                deltas = [self.lattice.delta]
            out.extend(self.lattice.replace(gamma=float(g), delta=float(d)) for d in deltas)
        return out

    def to_dict(self) -> Dict[str, Any]:
        lat = dataclasses.asdict(self.lattice)
        lat["terms"] = sorted(self.lattice.terms)
        return {
            "experiment": self.experiment,
            "lattice": lat,
            "drive": {
                "shape": list(self.drive_shapes),
                "t_total": self.t_total,
                "rounds": list(self.rounds),
            },
            "beta_grid": list(self.beta_grid),
            "gamma_grid": self.gamma_grid,
            "delta_grid": self.delta_grid,
            "delta_ratio_grid": self.delta_ratio_grid,
            "dt": self.dt,
            "merge_tol": self.merge_tol,
            "output_path": self.output_path,
            "output_format": self.output_format,
            "verify_subset": self.verify_subset,
        }


def _as_list(value, cast, name):
    if value is None:
        return None
    items = value if isinstance(value, (list, tuple)) else [value]
    try:
        return [cast(v) for v in items]
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{name}: {exc}") from None


def default_config(experiment: str) -> ExperimentConfig:
    """Figure-replication defaults for each experiment."""
    cfg = ExperimentConfig(experiment=experiment)
    if experiment == "work_distribution":
        cfg.beta_grid = [0.1, 1000.0]
    elif experiment == "spectrum_sweep":
        cfg.gamma_grid = [round(0.02 * k, 10) for k in range(126)]
        cfg.delta_ratio_grid = [0.0, 0.2]
    elif experiment == "verify":
        cfg.gamma_grid = None
    return cfg


def config_from_dict(data: Dict[str, Any], experiment: Optional[str] = None) -> ExperimentConfig:
    """Build a config from a JSON document; unspecified fields keep their defaults."""
    if not isinstance(data, dict):
        raise ValidationError("config: top level must be a JSON object")
    known = {
        "experiment", "lattice", "drive", "beta_grid", "gamma_grid", "delta_grid",
        "delta_ratio_grid", "dt", "merge_tol", "output_path", "output_format", "verify_subset",
    }
    unknown = set(data) - known
    if unknown:
        raise ValidationError(f"config: unknown fields {sorted(unknown)}")
    cfg = default_config(experiment or data.get("experiment", "beta_sweep"))
    if experiment is None and "experiment" in data:
        cfg.experiment = data["experiment"]

    lat = data.get("lattice", {})
    if not isinstance(lat, dict):
        raise ValidationError("lattice: must be an object")
    lat = dict(lat)
    if "terms" in lat:
        lat["terms"] = frozenset(_as_list(lat["terms"], str, "lattice.terms"))
    try:
        cfg.lattice = LatticeSpec(**lat)
    except TypeError as exc:
        raise ValidationError(f"lattice: {exc}") from None
    except ValidationError as exc:
        raise ValidationError(f"lattice: {exc}") from None

    drive = data.get("drive", {})
    if not isinstance(drive, dict):
        raise ValidationError("drive: must be an object")
    unknown = set(drive) - {"shape", "t_total", "rounds"}
    if unknown:
        raise ValidationError(f"drive: unknown fields {sorted(unknown)}")
    if "shape" in drive:
        cfg.drive_shapes = _as_list(drive["shape"], str, "drive.shape")
    if "t_total" in drive:
        cfg.t_total = _as_list(drive["t_total"], float, "drive.t_total")[0]
    if "rounds" in drive:
        cfg.rounds = _as_list(drive["rounds"], int, "drive.rounds")

    for name in ("beta_grid", "gamma_grid", "delta_grid", "delta_ratio_grid"):
        if name in data:
            setattr(cfg, name, _as_list(data[name], float, name))
    for name, cast in (("dt", float), ("merge_tol", float)):
        if name in data:
            try:
                setattr(cfg, name, cast(data[name]))
            except (TypeError, ValueError):
                raise ValidationError(f"{name}: expected a number") from None
    for name in ("output_path", "output_format", "verify_subset"):
        if name in data:
            setattr(cfg, name, data[name])
    return cfg.validate()


def _point_key(spec: LatticeSpec, profile: DriveProfile):
    return [spec.gamma, spec.delta, profile.shape, profile.rounds]


def run_beta_sweep(cfg: ExperimentConfig) -> Table:
    """Mean work, variance, system-energy change and Jarzynski average per point."""
    columns = [
        "beta", "gamma", "delta", "drive", "rounds",
        "W_ave", "variance", "dEs", "jarzynski_estimator", "log_norm",
    ]
    rows = []
    for spec, profile in itertools.product(cfg.lattice_points(), cfg.profiles()):
        for beta in cfg.beta_grid:
            table = workstats.purified_transition_table(spec, profile, beta, cfg.dt)
            mean, var = workstats.moments(workstats.work_distribution(table, cfg.merge_tol))
            des = workstats.system_energy_change(spec, profile, beta, cfg.dt)
            rows.append([
                float(beta), spec.gamma, spec.delta, profile.shape, profile.rounds,
                mean, var, des, workstats.jarzynski_estimator(table), table.log_norm,
            ])
    return Table(columns, rows)


def run_work_distribution(cfg: ExperimentConfig) -> Table:
    """Work atoms per point followed by one summary row holding the moments."""
    columns = ["gamma", "delta", "drive", "rounds", "beta", "record", "w", "p", "variance"]
    rows = []
    for spec, profile in itertools.product(cfg.lattice_points(), cfg.profiles()):
        for beta in cfg.beta_grid:
            table = workstats.purified_transition_table(spec, profile, beta, cfg.dt)
            dist = workstats.work_distribution(table, cfg.merge_tol)
            key = _point_key(spec, profile) + [float(beta)]
            for w, p in zip(dist.w, dist.p):
                rows.append(key + ["atom", float(w), float(p), None])
            mean, var = workstats.moments(dist)
            rows.append(key + ["summary", mean, None, var])
    return Table(columns, rows)


def run_spectrum_sweep(cfg: ExperimentConfig) -> Table:
    """Eigenvalue tracks of the ``f = 1`` Hamiltonian along gamma (or delta)."""
    columns = [
        "param", "param_value", "gamma", "delta", "track_index",
        "re_E", "im_E", "biorth_condition", "pt_unbroken",
    ]
    series = []
    if cfg.gamma_grid is not None:
        if cfg.delta_ratio_grid is not None:
            series = [("gamma", cfg.gamma_grid, cfg.lattice, r) for r in cfg.delta_ratio_grid]
        else:
            deltas = cfg.delta_grid if cfg.delta_grid is not None else [cfg.lattice.delta]
            series = [("gamma", cfg.gamma_grid, cfg.lattice.replace(delta=d), None) for d in deltas]
    elif cfg.delta_grid is not None:
        series = [("delta", cfg.delta_grid, cfg.lattice, None)]
    else:
        raise ValidationError("spectrum_sweep needs gamma_grid or delta_grid")
    rows = []
    for param, grid, base, ratio in series:
        reports = spectral.sweep_spectrum(base, param, grid, delta_ratio=ratio)
        for value, rep in zip(grid, reports):
            gamma = value if param == "gamma" else base.gamma
            if param == "delta":
                delta = value
            elif ratio is not None:
                delta = ratio * value
            else:
                delta = base.delta
            for e, track in zip(rep.eigenvalues, rep.track_index):
                rows.append([
                    param, float(value), float(gamma), float(delta), int(track),
                    float(e.real), float(e.imag), rep.biorth_condition, rep.pt_unbroken,
                ])
    return Table(columns, rows)


@dataclass
class CheckResult:
    check: str
    max_error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(self.max_error <= self.tolerance)


def _max_diff(a: workstats.TransitionTable, b: workstats.TransitionTable) -> float:
    return float(np.max(np.abs(a.probabilities - b.probabilities)))


def verification_checks(cfg: ExperimentConfig) -> List[CheckResult]:
    """The oracle suite: closed form versus brute force and Hermitian limits."""
    dt = cfg.dt
    g1, g2 = cfg.lattice.g1, cfg.lattice.g2
    short = [DriveProfile(SUDDEN, 2.0), DriveProfile(SLOW_SINE, 2.0)]
    results = []

    err = 0.0
    for sites, profile, beta in itertools.product((2, 4, 8), short, (0.0, 1.0, 1000.0)):
        spec = LatticeSpec(sites=sites, g1=g1, g2=g2)
        err = max(err, _max_diff(
            workstats.purified_transition_table(spec, profile, beta, dt),
            workstats.hermitian_tpm(spec, profile, beta, dt),
        ))
    results.append(CheckResult("hermitian_collapse", err, 1e-12))

    err = 0.0
    for profile, beta in itertools.product(short, (0.1, 1.0, 10.0)):
        spec = LatticeSpec(sites=8, g1=g1, g2=g2)
        table = workstats.hermitian_tpm(spec, profile, beta, dt)
        err = max(err, abs(workstats.jarzynski_estimator(table) - 1.0))
    results.append(CheckResult("jarzynski_hermitian", err, 1e-8))

    gammas = (0.0,) if cfg.verify_subset == "hermitian" else (0.5, 1.9, 2.1)
    err = 0.0
    for sites, gamma, beta, t_total in itertools.product((2, 4, 6), gammas, (0.0, 1.0, 100.0), (1.0, 10.0)):
        spec = LatticeSpec(sites=sites, g1=g1, g2=g2, gamma=gamma)
        profile = DriveProfile(SUDDEN, t_total)
        err = max(err, _max_diff(
            workstats.purified_transition_table(spec, profile, beta, dt),
            oracle.bath_tensor_simulation(spec, profile, beta, dt),
        ))
    results.append(CheckResult("bath_tensor_equivalence", err, 1e-10))

    if cfg.verify_subset == "hermitian":
        return results

    table_err = 0.0
    unitarity = 0.0
    for sites, n_steps, gamma, profile in itertools.product((2, 4), (1, 2, 4), (1.0, 2.1), short):
        spec = LatticeSpec(sites=sites, g1=g1, g2=g2, gamma=gamma)
        rep = oracle.unitary_dilation_check(spec, profile, n_steps, 1.0, dt)
        ref = workstats.purified_transition_table(spec, profile, 1.0, dt)
        table_err = max(table_err, _max_diff(rep.conditional_table, ref))
        unitarity = max(unitarity, rep.max_unitarity_defect)
    results.append(CheckResult("dilation_equivalence", table_err, 1e-6))
    results.append(CheckResult("dilation_unitarity", unitarity, 1e-10))
    return results


def run_verify(cfg: ExperimentConfig) -> Table:
    columns = ["check", "max_error", "tolerance", "passed"]
    rows = [[r.check, r.max_error, r.tolerance, r.passed] for r in verification_checks(cfg)]
    return Table(columns, rows)


RUNNERS = {
    "beta_sweep": run_beta_sweep,
    "work_distribution": run_work_distribution,
    "spectrum_sweep": run_spectrum_sweep,
    "verify": run_verify,
}
