"""Command-line front end for running experiments and diagnostics.

Exit codes: 0 on success, 2 on configuration errors, 3 when every trial of
an experiment fails numerically.
"""

from __future__ import annotations

import sys

import click
import numpy as np

from .harness import (
    AllTrialsFailed,
    ConfigError,
    ExperimentConfig,
    default_cs_schedule,
    emit,
    run_experiment,
    stats_by_step,
)
from .multi_index import MultiIndex, IndexSet, hyperbolic_cross_anchored, tensor_set, total_degree_set
from .oracles import KAPPA_MAX_D, KAPPA_MAX_N, best_n_term_product, kappa_max_lower, univariate_coeffs
from .poly_basis import BasisFamily, kappa


def _shared_options(fn):
    decorators = [
        click.option("--fn", "fn_id", default="f1", show_default=True, help="Target function id."),
        click.option("--dim", type=int, default=1, show_default=True),
        click.option("--family", type=click.Choice(["legendre", "cheb1", "cheb2"]), default="legendre", show_default=True),
        click.option("--sampling", type=click.Choice(["mc", "optimal"]), default="mc", show_default=True),
        click.option("--scaling", type=click.Choice(["loglinear", "linear15", "linear2"]), default="loglinear", show_default=True),
        click.option("--trials", type=int, default=50, show_default=True),
        click.option("--grid-size", type=int, default=100_000, show_default=True),
        click.option("--seed", type=int, default=0, show_default=True),
        click.option("--norm", type=click.Choice(["l2", "linf"]), default="l2", show_default=True),
        click.option("--out", type=click.Path(writable=True, dir_okay=False), default=None, help="Output file (stdout when omitted)."),
        click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv", show_default=True),
        click.option("--error-grid-seed", type=int, default=None, help="Score on an independent grid with this seed instead of the sampling grid."),
        click.option("--workers", type=int, default=1, show_default=True),
        click.option("--record-timings", is_flag=True, help="Fill wall_time_ms (off by default so reruns are byte-identical)."),
        click.option("--dofs", type=int, default=1023, show_default=True, help="Interior mesh nodes for the pde target."),
    ]
    for dec in reversed(decorators):
        fn = dec(fn)
    return fn


@click.group()
def main() -> None:
    """Adaptive and sparse polynomial approximation experiments."""


def _execute(config: ExperimentConfig, fmt: str, out: str | None) -> None:
    try:
        result = run_experiment(config)
    except ConfigError as exc:
        raise click.UsageError(str(exc)) from exc
    except AllTrialsFailed as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(3)
    text = emit(result, fmt=fmt, out=out)
    if out is None:
        click.echo(text, nl=False)
    else:
        click.echo(f"wrote {len(result.rows)} records to {out}", err=True)
    for step, m, stats in stats_by_step(result.rows, f"error_{config.norm}"):
        click.echo(
            f"step {step} (m={m}): geometric mean error_{config.norm} = {stats.center:.3e}",
            err=True,
        )


@main.command()
@_shared_options
@click.option("--max-m", type=int, default=1000, show_default=True, help="Stop before a step would need more samples than this.")
@click.option("--max-steps", type=int, default=None, help="Optional hard cap on adaptive steps.")
@click.option("--beta", type=float, default=0.5, show_default=True, help="Bulk-chasing fraction.")
def als(fn_id, dim, family, sampling, scaling, trials, grid_size, seed, norm, out, fmt,
        error_grid_seed, workers, record_timings, dofs, max_m, max_steps, beta):
    """Adaptive weighted least-squares approximation."""
    try:
        config = ExperimentConfig(
            fn=fn_id, dim=dim, method="als", family=family, sampling=sampling,
            scaling=scaling, trials=trials, grid_size=grid_size, seed=seed, norm=norm,
            max_m=max_m, max_steps=max_steps, beta=beta, dofs=dofs,
            error_grid_seed=error_grid_seed, record_timings=record_timings, workers=workers,
        )
    except ConfigError as exc:
        raise click.UsageError(str(exc)) from exc
    _execute(config, fmt, out)


@main.command()
@_shared_options
@click.option("--max-m", type=int, default=1000, show_default=True, help="Largest sample budget in the default schedule.")
@click.option("--m-schedule", default=None, help="Comma-separated sample budgets (overrides --max-m).")
@click.option("--budget", type=int, default=10_000, show_default=True, help="Candidate-set size cap.")
@click.option("--lam-rule", type=click.Choice(["experiment", "theorem"]), default="experiment", show_default=True)
def cs(fn_id, dim, family, sampling, scaling, trials, grid_size, seed, norm, out, fmt,
       error_grid_seed, workers, record_timings, dofs, max_m, m_schedule, budget, lam_rule):
    """Sparse-regression approximation at each budget in an m-schedule."""
    if m_schedule is not None:
        try:
            schedule = tuple(int(part) for part in m_schedule.split(",") if part.strip())
        except ValueError as exc:
            raise click.UsageError(f"bad --m-schedule: {exc}") from exc
    else:
        schedule = default_cs_schedule(max_m)
    try:
        config = ExperimentConfig(
            fn=fn_id, dim=dim, method="cs", family=family, sampling=sampling,
            scaling=scaling, trials=trials, grid_size=grid_size, seed=seed, norm=norm,
            max_m=max_m, m_schedule=schedule, budget=budget, lam_rule=lam_rule, dofs=dofs,
            error_grid_seed=error_grid_seed, record_timings=record_timings, workers=workers,
        )
    except ConfigError as exc:
        raise click.UsageError(str(exc)) from exc
    _execute(config, fmt, out)


SHAPES = ("line", "tensor", "td", "hci", "worst")


def _shape_set(shape: str, n: int, dim: int) -> IndexSet:
    if shape == "line":
        return IndexSet([MultiIndex.zero()] + [MultiIndex([(1, k)]) for k in range(1, n)])
    if shape == "tensor":
        return tensor_set(n, dim)
    if shape == "td":
        return total_degree_set(n, dim)
    if shape == "hci":
        return hyperbolic_cross_anchored(n, max_dim=dim)
    raise click.UsageError(f"unknown shape {shape!r}")


@main.command(name="kappa-scan")
@click.option("--family", type=click.Choice(["legendre", "cheb1", "cheb2"]), default="legendre", show_default=True)
@click.option("--dim", type=int, default=1, show_default=True)
@click.option("--shape", type=click.Choice(SHAPES), default="line", show_default=True,
              help="line: univariate degrees < n; tensor/td: order-n boxes/simplices; hci: size-n hyperbolic cross; worst: max over lower sets of size n.")
@click.option("--max-n", type=int, default=10, show_default=True)
@click.option("--out", type=click.Path(writable=True, dir_okay=False), default=None)
def kappa_scan(family, dim, shape, max_n, out):
    """Tabulate the sampling-cost constant kappa against set size/order."""
    fam = BasisFamily.from_tag(family)
    lines = ["n,kappa"]
    if shape == "worst":
        if dim > KAPPA_MAX_D or max_n > KAPPA_MAX_N:
            raise click.UsageError(
                f"worst-case scan is exhaustive; limited to dim <= {KAPPA_MAX_D}, n <= {KAPPA_MAX_N}"
            )
        for n in range(1, max_n + 1):
            lines.append(f"{n},{kappa_max_lower(fam, dim, n)!r}")
    else:
        for n in range(1, max_n + 1):
            lines.append(f"{n},{kappa(fam, _shape_set(shape, n, dim))!r}")
    text = "\n".join(lines) + "\n"
    if out is None:
        click.echo(text, nl=False)
    else:
        with open(out, "w", encoding="utf-8") as handle:
            handle.write(text)


def _product_factors(fn_id: str, dim: int):
    fid = fn_id.strip().lower()
    if fid == "f1":
        return [lambda y, i=i: np.exp(y / (2.0 * i)) for i in range(1, dim + 1)]
    if fid in ("f3:i", "f3:isq"):
        rule = (lambda i: i) if fid == "f3:i" else (lambda i: i * i)
        factors = []
        for i in range(1, dim + 1):
            delta = float(rule(i))
            scale = np.sqrt(2.0 * delta + delta**2)
            factors.append(lambda y, d=delta, s=scale: s / (y + 1.0 + d))
        return factors
    if fid == "low-dim":
        if dim != 1:
            raise click.UsageError("low-dim has a product form only with --dim 1")
        return [lambda y: 1.0 / (10.0 - 9.0 * y)]
    raise click.UsageError(
        "best-n-term needs a product-form target: f1, f3:i, f3:isq, or low-dim"
    )


@main.command(name="best-n-term")
@click.option("--fn", "fn_id", default="f3:i", show_default=True)
@click.option("--dim", type=int, default=2, show_default=True)
@click.option("--family", type=click.Choice(["legendre", "cheb1", "cheb2"]), default="legendre", show_default=True)
@click.option("--n-terms", type=int, default=10, show_default=True)
@click.option("--max-degree", type=int, default=60, show_default=True, help="Univariate expansion order per factor.")
@click.option("--out", type=click.Path(writable=True, dir_okay=False), default=None)
def best_n_term(fn_id, dim, family, n_terms, max_degree, out):
    """Reference best n-term errors for product-form targets."""
    fam = BasisFamily.from_tag(family)
    coeff_lists = []
    for factor in _product_factors(fn_id, dim):
        coeffs, tail, converged = univariate_coeffs(factor, fam, max_degree)
        # quadrature round-off keeps trailing coefficients near 1e-13 even for
        # fully resolved expansions, so the cut sits just above that floor
        if not converged or tail > 1e-12 * np.max(np.abs(coeffs)):
            raise click.UsageError(
                "univariate expansions have not converged; raise --max-degree"
            )
        coeff_lists.append(coeffs)
    lines = ["n,error"]
    for n in range(1, n_terms + 1):
        _, err = best_n_term_product(coeff_lists, n)
        lines.append(f"{n},{err!r}")
    text = "\n".join(lines) + "\n"
    if out is None:
        click.echo(text, nl=False)
    else:
        with open(out, "w", encoding="utf-8") as handle:
            handle.write(text)


@main.command()
@_shared_options
@click.option("--method", type=click.Choice(["als", "cs"]), default="als", show_default=True)
@click.option("--max-m", type=int, default=1000, show_default=True)
@click.option("--max-steps", type=int, default=None)
@click.option("--beta", type=float, default=0.5, show_default=True)
@click.option("--budget", type=int, default=10_000, show_default=True)
@click.option("--lam-rule", type=click.Choice(["experiment", "theorem"]), default="experiment", show_default=True)
def compare(fn_id, dim, family, sampling, scaling, trials, grid_size, seed, norm, out, fmt,
            error_grid_seed, workers, record_timings, dofs, method, max_m, max_steps, beta,
            budget, lam_rule):
    """Uniform vs. importance sampling for one method, step by step."""
    del sampling  # both strategies run; the shared flag is ignored here
    results = {}
    for strat in ("mc", "optimal"):
        try:
            config = ExperimentConfig(
                fn=fn_id, dim=dim, method=method, family=family, sampling=strat,
                scaling=scaling, trials=trials, grid_size=grid_size, seed=seed, norm=norm,
                max_m=max_m, max_steps=max_steps,
                m_schedule=default_cs_schedule(max_m) if method == "cs" else None,
                beta=beta, budget=budget, lam_rule=lam_rule, dofs=dofs,
                error_grid_seed=error_grid_seed, record_timings=record_timings,
                workers=workers,
            )
        except ConfigError as exc:
            raise click.UsageError(str(exc)) from exc
        try:
            results[strat] = run_experiment(config)
        except ConfigError as exc:
            raise click.UsageError(str(exc)) from exc
        except AllTrialsFailed as exc:
            click.echo(f"error ({strat}): {exc}", err=True)
            sys.exit(3)
    column = f"error_{norm}"
    mc_stats = {step: (m, s) for step, m, s in stats_by_step(results["mc"].rows, column)}
    opt_stats = {step: (m, s) for step, m, s in stats_by_step(results["optimal"].rows, column)}
    lines = [f"step,m,{column}_mc,{column}_optimal,ratio"]
    for step in sorted(set(mc_stats) & set(opt_stats)):
        m, mc_s = mc_stats[step]
        _, opt_s = opt_stats[step]
        ratio = mc_s.center / opt_s.center if opt_s.center > 0 else float("inf")
        lines.append(f"{step},{m},{mc_s.center!r},{opt_s.center!r},{ratio!r}")
    text = "\n".join(lines) + "\n"
    if out is None:
        click.echo(text, nl=False)
    else:
        with open(out, "w", encoding="utf-8") as handle:
            handle.write(text)


if __name__ == "__main__":
    main()
