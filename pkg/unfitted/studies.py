"""
🔬 Studies
==========
Runners behind the CLI subcommands: a single solve, convergence over mesh
levels, rotation sweeps, parameter sweeps and the CutFEM comparison.

Every case is independent; cases run on a thread pool and the rows are
sorted by (scheme, n, theta0, params) before anything is emitted, so the
output does not depend on completion order. A case that raises becomes a
row with status ``failed`` instead of aborting the study.
"""

from __future__ import annotations

import itertools
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from unfitted.background_mesh import build_crisscross
from unfitted.config import COMPARE_PARTNERS, DEFAULT_PARAMETERS, OUTPUT_DIR, SCHEMES, SEED, THREADS
from unfitted.errors import ConfigError, UnfittedError
from unfitted.fem_assembly import (
    LinearSystem,
    SchemeParams,
    assemble_cutfem,
    assemble_dirichlet,
    assemble_neumann,
    assemble_robin,
)
from unfitted.fem_core import build_scalar_space, build_vector_space
from unfitted.linear_solver import RESIDUAL_THRESHOLD, estimate_extreme_ritz, solve_direct
from unfitted.postprocess import convergence_slope, error_norms, triple_norm_error_mixed
from unfitted.problem_catalog import PROBLEMS, build_problem
from unfitted.unfitted_mesh import classify_and_extract, extract_boundary_segments

# ==========================================
# 🔧 CONFIGURATION
# ==========================================
MIN_LEVEL = 8
MIN_CONVERGENCE_LEVELS = 3
MIN_ROTATION_ANGLES = 8
ROTATION_ANGLES = 36
ROTATION_PERIOD = 2.0 * math.pi / 7.0
DEGENERATE_ERROR = 1e-10
RITZ_ITERATIONS = 50

CUTFEM_VARIANT_OF = {
    "cutfem_lagrange": "lagrange_p0",
    "cutfem_sym": "nitsche_sym",
    "cutfem_asym": "nitsche_asym",
    "cutfem_neumann": "neumann",
}
MIXED_SCHEMES = ("neumann", "robin")
GRADDIV_ALIASES = {"const": "constant", "constant": "constant", "h2": "h_squared", "h_squared": "h_squared"}

PARAM_COLUMNS = ["gamma", "sigma", "gamma_div", "gamma_1", "kappa", "graddiv_scaling"]
SORT_KEY = ["scheme", "n", "theta0"] + PARAM_COLUMNS
ERROR_COLUMNS = ["l2_rel", "h1_rel", "l2_meanfree_rel", "gamma_l2", "triple_norm"]
TIMING_COLUMNS = ["assemble_time", "solve_time"]
ROW_COLUMNS = (
    ["scheme", "problem", "n", "h", "theta0"]
    + PARAM_COLUMNS
    + ERROR_COLUMNS
    + ["dofs", "cut_cells", "residual", "status", "message"]
)


def _as_list(value) -> list:
    if value is None:
        return []
    if isinstance(value, (list, tuple)):
        return list(value)
    return [value]


# ==========================================
# 📋 Study configuration
# ==========================================

@dataclass(frozen=True)
class StudyConfig:
    name: Optional[str] = None
    scheme: str = "dirichlet"
    partner: Optional[str] = None
    problem: str = "flower"
    solution: str = "sinexp"
    R: float = 0.47
    radius: float = 0.25
    levels: tuple = (16, 32, 64, 128)
    theta0: tuple = ()
    angles: int = ROTATION_ANGLES
    gamma: tuple = ()
    sigma: tuple = ()
    gamma_div: tuple = ()
    gamma_1: tuple = ()
    kappa: tuple = ()
    graddiv_scaling: tuple = ("constant",)
    diagnostics: bool = False
    output_dir: str = OUTPUT_DIR
    threads: int = THREADS
    seed: int = SEED

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigError(f"❌ Unknown scheme '{self.scheme}' (known: {', '.join(SCHEMES)})")
        if self.partner is not None and self.partner not in SCHEMES:
            raise ConfigError(f"❌ Unknown partner scheme '{self.partner}'")
        if self.problem not in PROBLEMS:
            raise ConfigError(f"❌ Unknown problem '{self.problem}' (known: {', '.join(PROBLEMS)})")
        if not self.levels:
            raise ConfigError("❌ At least one mesh level is required")
        if any(int(n) != n or n < MIN_LEVEL for n in self.levels):
            raise ConfigError(f"❌ Mesh levels must be integers >= {MIN_LEVEL}, got {list(self.levels)}")
        if any(b <= a for a, b in zip(self.levels, self.levels[1:])):
            raise ConfigError(f"❌ Mesh levels must be strictly increasing, got {list(self.levels)}")
        if self.threads < 1:
            raise ConfigError(f"❌ threads must be >= 1, got {self.threads}")
        if self.angles < 1:
            raise ConfigError(f"❌ angles must be >= 1, got {self.angles}")
        for scaling in self.graddiv_scaling:
            if scaling not in GRADDIV_ALIASES.values():
                raise ConfigError(f"❌ Unknown graddiv_scaling '{scaling}'")

    @classmethod
    def from_mapping(cls, values: dict, **overrides) -> "StudyConfig":
        """Build from a config section plus CLI overrides (None means 'not given')."""
        merged = {**values, **{k: v for k, v in overrides.items() if v is not None}}
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(merged) - known)
        if unknown:
            raise ConfigError(f"❌ Unknown study config key(s): {', '.join(unknown)}")

        try:
            for key in ("levels", "theta0", "gamma", "sigma", "gamma_div", "gamma_1", "kappa", "graddiv_scaling"):
                if key in merged:
                    merged[key] = tuple(_as_list(merged[key]))
            if "levels" in merged:
                merged["levels"] = tuple(int(n) for n in merged["levels"])
            for key in ("theta0", "gamma", "sigma", "gamma_div", "gamma_1", "kappa"):
                if key in merged:
                    merged[key] = tuple(float(v) for v in merged[key])
            if "graddiv_scaling" in merged:
                merged["graddiv_scaling"] = tuple(GRADDIV_ALIASES.get(str(s), str(s)) for s in merged["graddiv_scaling"])
            for key in ("R", "radius"):
                if key in merged:
                    merged[key] = float(merged[key])
            for key in ("angles", "threads", "seed"):
                if key in merged:
                    merged[key] = int(merged[key])
        except (TypeError, ValueError) as e:
            raise ConfigError(f"❌ Invalid value in study config: {e}") from e
        return cls(**merged)

    def param_grid(self, scheme: Optional[str] = None, use_overrides: bool = True) -> list[SchemeParams]:
        """Cartesian product of the configured parameter lists over the scheme's defaults."""
        scheme = scheme or self.scheme
        defaults = {**asdict_params(SchemeParams()), **DEFAULT_PARAMETERS[scheme]}
        axes = {}
        for key in ("gamma", "sigma", "gamma_div", "gamma_1", "kappa"):
            chosen = getattr(self, key) if use_overrides else ()
            axes[key] = list(chosen) or [defaults[key]]
        axes["graddiv_scaling"] = list(self.graddiv_scaling) or ["constant"]
        try:
            return [SchemeParams(**dict(zip(axes, combo))) for combo in itertools.product(*axes.values())]
        except UnfittedError as e:
            raise ConfigError(f"❌ Invalid scheme parameters: {e}") from e


def asdict_params(params: SchemeParams) -> dict:
    return {name: getattr(params, name) for name in PARAM_COLUMNS}


@dataclass(frozen=True)
class Case:
    scheme: str
    n: int
    theta0: float
    params: SchemeParams


@dataclass(frozen=True, eq=False)
class CaseResult:
    row: dict
    timings: dict
    artifacts: dict = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class StudyReport:
    study: str
    rows: pd.DataFrame
    tables: dict = field(default_factory=dict)

    @property
    def failed(self) -> int:
        return int((self.rows["status"] != "ok").sum()) if len(self.rows) else 0

    @property
    def empty(self) -> bool:
        return len(self.rows) == 0


# ==========================================
# 🧮 Single case
# ==========================================

def assemble_case(scheme: str, problem, mesh, bg, bdry, space, params: SchemeParams) -> tuple[LinearSystem, object]:
    """Dispatch to the scheme's assembler; returns the system and Z_h (or None)."""
    if scheme == "dirichlet":
        return assemble_dirichlet(problem, mesh, bg, bdry, space, params), None
    if scheme in MIXED_SCHEMES:
        zspace = build_vector_space(mesh, bg)
        assemble = assemble_neumann if scheme == "neumann" else assemble_robin
        return assemble(problem, mesh, bg, bdry, space, zspace, params), zspace
    return assemble_cutfem(problem, mesh, bg, bdry, space, CUTFEM_VARIANT_OF[scheme], params), None


def _base_row(config: StudyConfig, case: Case) -> dict:
    bg_h = (1.0 / case.n) * math.sqrt(2.0) / 2.0
    row = {
        "scheme": case.scheme,
        "problem": config.problem if config.solution == "sinexp" else f"{config.problem}-{config.solution}",
        "n": case.n,
        "h": bg_h,
        "theta0": case.theta0,
        **asdict_params(case.params),
    }
    row.update({name: float("nan") for name in ERROR_COLUMNS})
    row.update({"dofs": 0, "cut_cells": 0, "residual": float("nan"), "status": "ok", "message": ""})
    if config.diagnostics:
        row.update({"ritz_min": float("nan"), "ritz_max": float("nan")})
    return row


def solve_case(config: StudyConfig, case: Case, keep_artifacts: bool = False) -> CaseResult:
    """Build geometry, assemble, solve and measure one (scheme, n, θ₀, params) case."""
    row = _base_row(config, case)
    timings = {"assemble_time": float("nan"), "solve_time": float("nan")}
    artifacts = {}
    try:
        problem = build_problem(
            config.problem,
            R=config.R,
            radius=config.radius,
            theta0=case.theta0,
            kappa=case.params.kappa,
            solution=config.solution,
        )
        start = time.perf_counter()
        bg = build_crisscross(case.n)
        mesh = classify_and_extract(bg, problem)
        bdry = extract_boundary_segments(mesh, bg)
        space = build_scalar_space(mesh, bg)
        system, zspace = assemble_case(case.scheme, problem, mesh, bg, bdry, space, case.params)
        timings["assemble_time"] = time.perf_counter() - start
        row.update({"h": mesh.h, "dofs": system.n, "cut_cells": mesh.n_cut})

        report = solve_direct(system)
        timings["solve_time"] = report.factor_time + report.solve_time
        row["residual"] = report.residual_norm

        errors = error_norms(problem, report.solution[: space.n_dofs], mesh, bg, space, bdry)
        row.update(errors.as_dict())
        if zspace is not None:
            row["triple_norm"] = triple_norm_error_mixed(problem, report.solution, mesh, bg, space, zspace)
        if not report.accepted:
            row["status"] = "failed"
            row["message"] = f"residual {report.residual_norm:.3e} above {RESIDUAL_THRESHOLD:.0e}"
        if config.diagnostics:
            row["ritz_min"], row["ritz_max"] = estimate_extreme_ritz(system, RITZ_ITERATIONS, seed=config.seed)
        if keep_artifacts:
            artifacts = {
                "background": bg,
                "mesh": mesh,
                "boundary": bdry,
                "space": space,
                "zspace": zspace,
                "system": system,
                "solution": report.solution,
            }
    except UnfittedError as e:
        row["status"] = "failed"
        row["message"] = str(e)
        logging.warning(f"⚠️ {case.scheme} n={case.n} θ₀={case.theta0:.6f} failed: {e}")
    except Exception as e:
        # anything else is still one case, not the whole study
        row["status"] = "failed"
        row["message"] = f"{type(e).__name__}: {e}"
        logging.exception(f"❌ {case.scheme} n={case.n} θ₀={case.theta0:.6f} failed unexpectedly")
    else:
        logging.info(
            f"✅ {case.scheme} n={case.n} θ₀={case.theta0:.4f}: "
            f"L2 {row['l2_rel']:.3e}, H1 {row['h1_rel']:.3e}, residual {row['residual']:.1e}"
        )
    return CaseResult(row=row, timings=timings, artifacts=artifacts)


# ==========================================
# 🏃 Running case lists
# ==========================================

def _run_cases(config: StudyConfig, cases: list[Case]) -> tuple[pd.DataFrame, pd.DataFrame]:
    logging.info(f"🚀 Running {len(cases)} case(s) on {config.threads} thread(s)")
    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            results = list(pool.map(lambda case: solve_case(config, case), cases))
    else:
        results = [solve_case(config, case) for case in cases]

    columns = ROW_COLUMNS + (["ritz_min", "ritz_max"] if config.diagnostics else [])
    rows = pd.DataFrame([r.row for r in results], columns=columns)
    timings = pd.DataFrame([{**{k: r.row[k] for k in SORT_KEY}, **r.timings} for r in results])
    rows = rows.sort_values(SORT_KEY, kind="mergesort").reset_index(drop=True)
    timings = timings.sort_values(SORT_KEY, kind="mergesort").reset_index(drop=True)
    for column in TIMING_COLUMNS:
        rows[column] = timings[column].to_numpy()

    failed = int((rows["status"] != "ok").sum())
    if failed:
        logging.warning(f"⚠️ {failed} of {len(rows)} case(s) failed")
    return rows, timings


def _slopes(rows: pd.DataFrame) -> pd.DataFrame:
    """Least-squares slopes per (scheme, θ₀, params) group; NaN when degenerate or too few levels."""
    records = []
    ok = rows[rows["status"] == "ok"]
    for key, group in ok.groupby(["scheme", "theta0"] + PARAM_COLUMNS, sort=True):
        record = dict(zip(["scheme", "theta0"] + PARAM_COLUMNS, key))
        record["levels"] = len(group)
        for column in ("l2_rel", "h1_rel", "l2_meanfree_rel"):
            values = group[column].to_numpy()
            slope = float("nan")
            if len(group) >= MIN_CONVERGENCE_LEVELS and np.all(values > DEGENERATE_ERROR):
                slope = convergence_slope(np.column_stack([group["h"].to_numpy(), values]))
            record[f"{column.replace('_rel', '')}_slope"] = slope
        records.append(record)
    columns = ["scheme", "theta0"] + PARAM_COLUMNS + ["levels", "l2_slope", "h1_slope", "l2_meanfree_slope"]
    return pd.DataFrame(records, columns=columns)


def _levels_cases(config: StudyConfig, scheme: str, thetas, use_overrides: bool = True) -> list[Case]:
    return [
        Case(scheme=scheme, n=n, theta0=float(theta), params=params)
        for params in config.param_grid(scheme, use_overrides)
        for n in config.levels
        for theta in thetas
    ]


# ==========================================
# 📈 Study runners
# ==========================================

def run_solve(config: StudyConfig) -> tuple[StudyReport, CaseResult]:
    """One case: the first level, the first angle and the first grid point."""
    theta = config.theta0[0] if config.theta0 else 0.0
    case = Case(config.scheme, config.levels[0], float(theta), config.param_grid()[0])
    result = solve_case(config, case, keep_artifacts=True)
    rows = pd.DataFrame([result.row], columns=ROW_COLUMNS + (["ritz_min", "ritz_max"] if config.diagnostics else []))
    for column in TIMING_COLUMNS:
        rows[column] = [result.timings[column]]
    return StudyReport(study="solve", rows=rows), result


def run_convergence(config: StudyConfig) -> StudyReport:
    if len(config.levels) < MIN_CONVERGENCE_LEVELS:
        raise ConfigError(f"❌ Convergence study needs at least {MIN_CONVERGENCE_LEVELS} mesh levels")
    thetas = config.theta0 or (0.0,)
    rows, _ = _run_cases(config, _levels_cases(config, config.scheme, thetas))
    slopes = _slopes(rows)
    for record in slopes.itertuples():
        logging.info(f"📊 {record.scheme} θ₀={record.theta0:.4f}: L2 slope {record.l2_slope:.3f}, H1 slope {record.h1_slope:.3f}")
    return StudyReport(study="convergence", rows=rows, tables={"slopes": slopes})


def rotation_angles(config: StudyConfig) -> tuple:
    if config.theta0:
        return tuple(config.theta0)
    return tuple(float(t) for t in np.linspace(0.0, ROTATION_PERIOD, config.angles))


def _rotation_ratios(rows: pd.DataFrame) -> pd.DataFrame:
    records = []
    ok = rows[rows["status"] == "ok"]
    for key, group in ok.groupby(["scheme", "n"] + PARAM_COLUMNS, sort=True):
        record = dict(zip(["scheme", "n"] + PARAM_COLUMNS, key))
        record["angles"] = len(group)
        for column in ("l2_rel", "h1_rel"):
            values = group[column].to_numpy()
            low = values.min()
            record[f"{column.replace('_rel', '')}_ratio"] = float(values.max() / low) if low > 0 else float("inf")
        records.append(record)
    columns = ["scheme", "n"] + PARAM_COLUMNS + ["angles", "l2_ratio", "h1_ratio"]
    return pd.DataFrame(records, columns=columns)


def run_rotation_sweep(config: StudyConfig) -> StudyReport:
    thetas = rotation_angles(config)
    if len(thetas) < MIN_ROTATION_ANGLES:
        raise ConfigError(f"❌ Rotation sweep needs at least {MIN_ROTATION_ANGLES} angles, got {len(thetas)}")
    rows, _ = _run_cases(config, _levels_cases(config, config.scheme, thetas))
    ratios = _rotation_ratios(rows)
    for record in ratios.itertuples():
        logging.info(f"📊 {record.scheme} n={record.n}: max/min L2 {record.l2_ratio:.3f}, H1 {record.h1_ratio:.3f}")
    return StudyReport(study="rotate-sweep", rows=rows, tables={"ratios": ratios})


def _sigma_monotone(rows: pd.DataFrame) -> pd.Series:
    """For γ ≤ 1: is the H¹ error nondecreasing in σ along each (n, γ, ...) line? Empty elsewhere."""
    flags = pd.Series([None] * len(rows), index=rows.index, dtype=object)
    group_keys = ["scheme", "n", "theta0", "gamma", "gamma_div", "gamma_1", "kappa", "graddiv_scaling"]
    candidates = rows[(rows["gamma"] <= 1.0) & (rows["status"] == "ok")]
    for _, group in candidates.groupby(group_keys, sort=True):
        ordered = group.sort_values("sigma", kind="mergesort")
        monotone = bool(np.all(np.diff(ordered["h1_rel"].to_numpy()) >= 0.0))
        flags.loc[ordered.index] = monotone
    return flags


def run_param_sweep(config: StudyConfig) -> StudyReport:
    grid = config.param_grid()
    if not grid:
        raise ConfigError("❌ Parameter sweep needs a nonempty grid")
    thetas = config.theta0 or (0.0,)
    rows, _ = _run_cases(config, _levels_cases(config, config.scheme, thetas))
    rows["sigma_monotone"] = _sigma_monotone(rows)
    logging.info(f"📊 Parameter sweep: {len(grid)} grid point(s) × {len(config.levels)} level(s)")
    return StudyReport(study="param-sweep", rows=rows)


def run_compare(config: StudyConfig) -> StudyReport:
    """The configured scheme and its CutFEM partner on the same levels and angles, joined per case."""
    partner = config.partner or COMPARE_PARTNERS.get(config.scheme)
    if partner is None:
        raise ConfigError(f"❌ No comparison partner for scheme '{config.scheme}'; set 'partner'")
    thetas = config.theta0 or (0.0,)
    cases = _levels_cases(config, config.scheme, thetas) + _levels_cases(config, partner, thetas, use_overrides=False)
    rows, _ = _run_cases(config, cases)

    keys = ["n", "theta0"]
    left = rows[rows["scheme"] == config.scheme][keys + ["l2_rel", "h1_rel"]]
    right = rows[rows["scheme"] == partner][keys + ["l2_rel", "h1_rel"]]
    joined = left.merge(right, on=keys, suffixes=(f"_{config.scheme}", f"_{partner}"), sort=True)
    joined["h1_factor"] = joined[f"h1_rel_{partner}"] / joined[f"h1_rel_{config.scheme}"]
    joined["l2_factor"] = joined[f"l2_rel_{partner}"] / joined[f"l2_rel_{config.scheme}"]
    for record in joined.itertuples():
        logging.info(f"📊 n={record.n} θ₀={record.theta0:.4f}: {partner}/{config.scheme} H1 × {record.h1_factor:.3f}, L2 × {record.l2_factor:.3f}")

    tables = {"joined": joined}
    if len(config.levels) >= MIN_CONVERGENCE_LEVELS:
        tables["slopes"] = _slopes(rows)
    return StudyReport(study="compare", rows=rows, tables=tables)


def dump_artifacts(result: CaseResult, directory) -> list[Path]:
    """Write background mesh, Γ segments and matrix of a solved case as plain text."""
    if not result.artifacts:
        raise UnfittedError("❌ Case has no artifacts to dump (it failed or was run without keep_artifacts)")
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    return [
        result.artifacts["background"].dump(directory / "mesh.txt"),
        result.artifacts["boundary"].dump(directory / "gamma.txt"),
        result.artifacts["system"].dump(directory / "matrix.txt"),
    ]


RUNNERS = {
    "convergence": run_convergence,
    "rotate-sweep": run_rotation_sweep,
    "param-sweep": run_param_sweep,
    "compare": run_compare,
}
