"""Experiment orchestration: configs, trials, metrics, and result files.

Runs the adaptive least-squares driver or the sparse-regression solver over
T independent trials on a shared random evaluation grid, collects one record
per (trial, step), and writes self-describing CSV/JSON.  Output bytes depend
only on the configuration (including the master seed), never on the worker
count: every trial derives its generator from the master seed and a role
string, the grid and target values are precomputed before the pool starts,
and BLAS threading is pinned while trials run.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable

import numpy as np
from threadpoolctl import threadpool_limits

from .poly_basis import BasisFamily, eval_expansion, kappa
from .sampling import DegenerateGridError, Grid, draw_grid
from .sr_lasso import DEFAULT_BUDGET, candidate_set, cs_approximate
from .test_functions import TargetFunction, get_target
from .weighted_ls import als_run

CSV_HEADER = "trial,step,m,n,error_l2,error_linf,cond,kappa,wall_time_ms"

FAMILIES = ("legendre", "cheb1", "cheb2")
SAMPLINGS = ("mc", "optimal")
SCALINGS = ("loglinear", "linear15", "linear2")
NORMS = ("l2", "linf")
METHODS = ("als", "cs", "cs-christoffel")

DEFAULT_TRIALS = 50
DEFAULT_GRID_SIZE = 100_000


class ConfigError(ValueError):
    """Invalid experiment configuration (maps to CLI exit code 2)."""


class AllTrialsFailed(RuntimeError):
    """Every trial hit a numerical failure (maps to CLI exit code 3)."""


def child_seed(master: int, role: str) -> int:
    """Derive an independent, process-stable 64-bit seed for a named role."""
    digest = hashlib.sha256(role.encode("utf-8")).digest()
    return (int(master) ^ int.from_bytes(digest[:8], "little")) & 0xFFFFFFFFFFFFFFFF


def default_cs_schedule(max_m: int, count: int = 8, start: int = 25) -> tuple[int, ...]:
    """Log-spaced sample-budget schedule from `start` up to max_m."""
    if max_m < start:
        return (max_m,)
    raw = np.geomspace(start, max_m, count)
    return tuple(sorted({int(round(v)) for v in raw}))


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one experiment byte-for-byte."""

    fn: str
    dim: int
    method: str = "als"
    family: str = "legendre"
    sampling: str = "mc"
    scaling: str = "loglinear"
    trials: int = DEFAULT_TRIALS
    grid_size: int = DEFAULT_GRID_SIZE
    seed: int = 0
    norm: str = "l2"
    max_m: int | None = 1000
    max_steps: int | None = None
    m_schedule: tuple[int, ...] | None = None
    beta: float = 0.5
    budget: int = DEFAULT_BUDGET
    lam_rule: str = "experiment"
    dofs: int = 1023
    error_grid_seed: int | None = None
    record_timings: bool = False
    workers: int = 1

    def __post_init__(self):
        method = self.method
        if method == "cs" and self.sampling == "optimal":
            method = "cs-christoffel"
        if method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}")
        object.__setattr__(self, "method", method)
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown family {self.family!r}")
        if self.sampling not in SAMPLINGS:
            raise ConfigError(f"unknown sampling strategy {self.sampling!r}")
        if self.scaling not in SCALINGS:
            raise ConfigError(f"unknown scaling rule {self.scaling!r}")
        if self.norm not in NORMS:
            raise ConfigError(f"unknown error norm {self.norm!r}")
        if self.trials < 1:
            raise ConfigError("need trials >= 1")
        if self.dim < 1:
            raise ConfigError("need dim >= 1")
        if self.grid_size < 1:
            raise ConfigError("need grid_size >= 1")
        if self.workers < 1:
            raise ConfigError("need workers >= 1")
        if self.method == "als":
            if self.max_m is None and self.max_steps is None:
                raise ConfigError("als needs max_m and/or max_steps")
            if self.max_m is not None and self.grid_size < self.max_m:
                raise ConfigError("grid_size must cover the largest sample budget")
        else:
            schedule = self.m_schedule
            if schedule is None:
                schedule = default_cs_schedule(self.max_m if self.max_m else 1000)
            schedule = tuple(int(m) for m in schedule)
            if not schedule or any(m < 1 for m in schedule):
                raise ConfigError("m_schedule must hold positive sample counts")
            if self.grid_size < max(schedule):
                raise ConfigError("grid_size must cover the largest sample budget")
            object.__setattr__(self, "m_schedule", schedule)

    def to_dict(self) -> dict:
        out = asdict(self)
        # worker count is an execution detail: results must be byte-identical
        # across parallelism degrees, so it stays out of the serialized echo
        del out["workers"]
        if out["m_schedule"] is not None:
            out["m_schedule"] = list(out["m_schedule"])
        return out


@dataclass(frozen=True)
class RecordRow:
    trial: int
    step: int
    m: int
    n: int
    error_l2: float
    error_linf: float
    cond: float
    kappa: float
    wall_time_ms: float

    def csv_line(self) -> str:
        floats = (self.error_l2, self.error_linf, self.cond, self.kappa, self.wall_time_ms)
        tail = ",".join(repr(float(v)) for v in floats)
        return f"{self.trial},{self.step},{self.m},{self.n},{tail}"

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class TrialFailure:
    trial: int
    error: str


@dataclass(frozen=True)
class ExperimentResult:
    config: ExperimentConfig
    rows: tuple[RecordRow, ...]
    failures: tuple[TrialFailure, ...] = ()

    @property
    def failed_trials(self) -> int:
        return len(self.failures)


# ---------------------------------------------------------------------------
# metrics


def relative_error(approx_values, target_values, norm: str = "l2") -> float:
    """Relative discrete error of approx against target over a shared grid."""
    approx = np.asarray(approx_values, dtype=float)
    target = np.asarray(target_values, dtype=float)
    if approx.shape != target.shape:
        raise ValueError("approximation and target grids differ in length")
    diff = approx - target
    if norm == "l2":
        denom = float(np.linalg.norm(target))
        if denom == 0.0:
            raise ValueError("target has zero norm on the grid")
        return float(np.linalg.norm(diff) / denom)
    if norm == "linf":
        denom = float(np.max(np.abs(target)))
        if denom == 0.0:
            raise ValueError("target has zero norm on the grid")
        return float(np.max(np.abs(diff)) / denom)
    raise ValueError(f"unknown norm {norm!r}")


ZERO_FLOOR = 1e-300


@dataclass(frozen=True)
class GeometricStats:
    center: float
    lower: float
    upper: float
    floored: bool = False


def geometric_stats(values) -> GeometricStats:
    """Geometric mean with a corrected geometric-standard-deviation band.

    center = 10^mean(log10 v); band endpoints 10^(mean +- std) with the
    (T-1)-corrected std of the log10 values.  Nonpositive entries are floored
    at 1e-300 and flagged.
    """
    vals = np.asarray(values, dtype=float)
    if vals.size == 0:
        raise ValueError("need at least one value")
    floored = bool(np.any(vals < ZERO_FLOOR))
    logs = np.log10(np.maximum(vals, ZERO_FLOOR))
    mu = float(np.mean(logs))
    sigma = float(np.std(logs, ddof=1)) if vals.size > 1 else 0.0
    return GeometricStats(
        center=10.0**mu, lower=10.0 ** (mu - sigma), upper=10.0 ** (mu + sigma), floored=floored
    )


# ---------------------------------------------------------------------------
# target-value cache


def default_cache_dir() -> Path:
    env = os.environ.get("HDPOLY_CACHE_DIR")
    if env:
        return Path(env)
    return Path.home() / ".cache" / "hdpoly"


def _target_cache_key(fn_id: str, dofs: int, grid: Grid) -> str:
    h = hashlib.sha256()
    h.update(f"{fn_id}|{dofs}|{grid.d}|{grid.K}|{grid.measure.value}|{grid.seed}".encode())
    h.update(np.ascontiguousarray(grid.points).tobytes())
    return h.hexdigest()[:24]


def cached_target_values(
    target: TargetFunction, grid: Grid, *, dofs: int = 1023, cache_dir: Path | None = None
) -> np.ndarray:
    """Target values on the grid, memoized to disk keyed by function + grid."""
    directory = default_cache_dir() if cache_dir is None else Path(cache_dir)
    path = directory / f"target-{_target_cache_key(target.id, dofs, grid)}.npy"
    if path.exists():
        return np.load(path)
    values = target.eval_batch(grid.points)
    try:
        directory.mkdir(parents=True, exist_ok=True)
        # tmp name must keep the .npy suffix or np.save appends another one
        tmp = path.with_suffix(f".{os.getpid()}.tmp.npy")
        np.save(tmp, values)
        os.replace(tmp, path)
    except OSError:
        pass  # cache is best-effort; the values are still returned
    return values


# ---------------------------------------------------------------------------
# experiment driver


def _als_trial_rows(
    trial: int,
    config: ExperimentConfig,
    family: BasisFamily,
    grid: Grid,
    target_values: np.ndarray,
    error_grid: Grid | None,
    error_values: np.ndarray | None,
) -> list[RecordRow]:
    rng = np.random.default_rng(child_seed(config.seed, f"trial:{trial}"))
    trace = als_run(
        target_values,
        family,
        config.sampling,
        config.scaling,
        grid,
        rng,
        beta=config.beta,
        max_m=config.max_m,
        max_steps=config.max_steps,
    )
    rows = []
    for step_no, step in enumerate(trace.steps, start=1):
        err_l2, err_linf = step.error_l2, step.error_linf
        if error_grid is not None:
            approx = eval_expansion(family, step.result.coefficients, error_grid.points)
            err_l2 = relative_error(approx, error_values, "l2")
            err_linf = relative_error(approx, error_values, "linf")
        rows.append(
            RecordRow(
                trial=trial,
                step=step_no,
                m=step.m,
                n=step.n,
                error_l2=err_l2,
                error_linf=err_linf,
                cond=step.result.condition_number,
                kappa=step.kappa_value,
                wall_time_ms=step.wall_time_ms if config.record_timings else 0.0,
            )
        )
    return rows


def _cs_trial_rows(
    trial: int,
    config: ExperimentConfig,
    family: BasisFamily,
    grid: Grid,
    target_values: np.ndarray,
    error_grid: Grid | None,
    error_values: np.ndarray | None,
    candidate_size: int,
    candidate_kappa: float,
) -> list[RecordRow]:
    rng = np.random.default_rng(child_seed(config.seed, f"trial:{trial}"))
    strategy = "christoffel" if config.method == "cs-christoffel" else "mc"
    eval_points = grid.points if error_grid is None else error_grid.points
    eval_values = target_values if error_values is None else error_values
    rows = []
    for step_no, m in enumerate(config.m_schedule, start=1):
        t0 = time.perf_counter()
        result = cs_approximate(
            target_values,
            family,
            config.dim,
            m,
            grid,
            rng,
            strategy=strategy,
            budget=config.budget,
            lam_rule=config.lam_rule,
            want_condition=True,
        )
        wall_ms = (time.perf_counter() - t0) * 1e3
        approx = eval_expansion(family, result.coefficients, eval_points)
        rows.append(
            RecordRow(
                trial=trial,
                step=step_no,
                m=m,
                n=candidate_size,
                error_l2=relative_error(approx, eval_values, "l2"),
                error_linf=relative_error(approx, eval_values, "linf"),
                cond=result.condition_number,
                kappa=candidate_kappa,
                wall_time_ms=wall_ms if config.record_timings else 0.0,
            )
        )
    return rows


def run_experiment(config: ExperimentConfig, *, cache_dir: Path | None = None) -> ExperimentResult:
    """Run all trials of one experiment and merge their records.

    Deterministic for a fixed config regardless of `workers`: trials draw
    from seeds derived per trial index, and shared state (grid, target
    values, candidate set) is computed before the pool starts.  Individual
    trial failures are recorded and the rest continue; if every trial fails,
    AllTrialsFailed is raised.
    """
    family = BasisFamily.from_tag(config.family)
    try:
        grid = draw_grid(config.dim, config.grid_size, family, child_seed(config.seed, "grid"))
        target = get_target(config.fn, config.dim, dofs=config.dofs)
        target_values = cached_target_values(target, grid, dofs=config.dofs, cache_dir=cache_dir)
        error_grid = None
        error_values = None
        if config.error_grid_seed is not None:
            error_grid = draw_grid(
                config.dim, config.grid_size, family, int(config.error_grid_seed)
            )
            error_values = cached_target_values(
                target, error_grid, dofs=config.dofs, cache_dir=cache_dir
            )
        if config.method == "als":
            def one_trial(t: int) -> list[RecordRow]:
                return _als_trial_rows(
                    t, config, family, grid, target_values, error_grid, error_values
                )
        else:
            lam = candidate_set(config.dim, config.budget)
            size, kap = len(lam), kappa(family, lam)

            def one_trial(t: int) -> list[RecordRow]:
                return _cs_trial_rows(
                    t, config, family, grid, target_values, error_grid, error_values, size, kap
                )
    except (ValueError, NotImplementedError) as exc:
        raise ConfigError(str(exc)) from exc

    completed: dict[int, list[RecordRow]] = {}
    failures: dict[int, str] = {}

    def guarded(t: int) -> None:
        try:
            completed[t] = one_trial(t)
        except (DegenerateGridError, RuntimeError, FloatingPointError, np.linalg.LinAlgError) as exc:
            failures[t] = f"{type(exc).__name__}: {exc}"

    with threadpool_limits(limits=1):
        if config.workers == 1:
            for t in range(config.trials):
                guarded(t)
        else:
            with ThreadPoolExecutor(max_workers=config.workers) as pool:
                list(pool.map(guarded, range(config.trials)))

    if not completed:
        first = failures[min(failures)] if failures else "no trials ran"
        raise AllTrialsFailed(f"all {config.trials} trials failed; first error: {first}")
    rows = [row for t in sorted(completed) for row in completed[t]]
    rows.sort(key=lambda r: (r.trial, r.step))
    fail_rows = tuple(TrialFailure(trial=t, error=failures[t]) for t in sorted(failures))
    return ExperimentResult(config=config, rows=tuple(rows), failures=fail_rows)


# ---------------------------------------------------------------------------
# persistence


def render_csv(result: ExperimentResult) -> str:
    """Self-describing CSV: config comment, exact header, one line per record."""
    lines = [f"# config: {json.dumps(result.config.to_dict(), sort_keys=True)}"]
    if result.failures:
        failed = json.dumps([asdict(f) for f in result.failures], sort_keys=True)
        lines.append(f"# failures: {failed}")
    lines.append(CSV_HEADER)
    lines.extend(row.csv_line() for row in result.rows)
    return "\n".join(lines) + "\n"


def render_json(result: ExperimentResult) -> str:
    payload = {
        "config": result.config.to_dict(),
        "failures": [asdict(f) for f in result.failures],
        "rows": [row.to_dict() for row in result.rows],
    }
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def emit(result: ExperimentResult, fmt: str = "csv", out: str | Path | None = None) -> str:
    """Render records in the chosen format; write to `out` when given."""
    if fmt == "csv":
        text = render_csv(result)
    elif fmt == "json":
        text = render_json(result)
    else:
        raise ValueError(f"unknown output format {fmt!r}")
    if out is not None:
        Path(out).write_text(text, encoding="utf-8")
    return text


def parse_csv(text: str) -> tuple[dict, list[RecordRow]]:
    """Inverse of render_csv (used by round-trip checks and downstream tools)."""
    config: dict = {}
    rows: list[RecordRow] = []
    lines = [ln for ln in text.splitlines() if ln]
    body: list[str] = []
    for ln in lines:
        if ln.startswith("# config: "):
            config = json.loads(ln[len("# config: "):])
        elif ln.startswith("#"):
            continue
        else:
            body.append(ln)
    if not body or body[0] != CSV_HEADER:
        raise ValueError("missing or unexpected CSV header")
    for ln in body[1:]:
        parts = ln.split(",")
        if len(parts) != 9:
            raise ValueError(f"malformed record line: {ln!r}")
        rows.append(
            RecordRow(
                trial=int(parts[0]),
                step=int(parts[1]),
                m=int(parts[2]),
                n=int(parts[3]),
                error_l2=float(parts[4]),
                error_linf=float(parts[5]),
                cond=float(parts[6]),
                kappa=float(parts[7]),
                wall_time_ms=float(parts[8]),
            )
        )
    return config, rows


def stats_by_step(
    rows: Iterable[RecordRow], column: str
) -> list[tuple[int, int, GeometricStats]]:
    """Per-step geometric statistics of one record column across trials.

    Returns (step, m, stats) sorted by step; steps may have different trial
    counts when some trials stopped early.
    """
    grouped: dict[int, list[RecordRow]] = {}
    for row in rows:
        grouped.setdefault(row.step, []).append(row)
    out = []
    for step in sorted(grouped):
        bucket = grouped[step]
        values = [getattr(r, column) for r in bucket]
        out.append((step, bucket[0].m, geometric_stats(values)))
    return out
