"""
Command-line harness: one subcommand per experiment, CSV on --out (or stdout)
and a one-line summary.

Exit status: 0 when the experiment's contract holds, 2 when it is violated,
1 on usage or runtime errors.
"""
import logging
import sys
from typing import List, Optional

import click
import numpy as np
import pandas as pd

from config import Config, configure_logging
from diffseq import hardy_constant, hardy_ratio, hardy_sequence, make_symbol, sk_diagnostics
from generator import (
    closed_form_resolvent_bound,
    laplace_error_bound,
    richardson_steps,
    estimate_norm,
    laplace_resolvent,
    resolvent_apply,
    spectral_mapping_deviation,
    spectrum_distance,
)
from hkspace import block_norm_lower_bound, isometric_coordinates, minimality_decay_exponent
from models import (
    BasisModel,
    CoeffVec,
    GeneratorConfig,
    LabError,
    NormMethod,
    OperatorSpec,
    OutOfRange,
    RunConfig,
    SpaceConfig,
    SymbolKind,
)
from spectra_lab import (
    block_norms,
    group_growth_scan,
    nongeneration_witness,
    partial_sum_projection_norms,
    resolvent_blowup_scan,
    vertical_integral_scan,
)
from storage import LabStorage

logger = logging.getLogger(__name__)

CONTRACT_PASSED = 0
RUNTIME_ERROR = 1
CONTRACT_VIOLATED = 2

SYMBOL_CHOICES = ["log", "iterated-log", "sqrt-witness", "table"]
METHOD_CHOICES = [m.value for m in NormMethod]


# ---------------------------------------------------------------------------
# Flag helpers
# ---------------------------------------------------------------------------

def parse_complex(text: str) -> complex:
    """Accepts 0+2i, 1-0.5j, 3, 2i"""
    try:
        return complex(text.replace(" ", "").replace("i", "j"))
    except ValueError as e:
        raise click.BadParameter(f"{text!r} is not a complex number") from e


def parse_list(text: str, cast=float) -> list:
    try:
        values = [cast(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as e:
        raise click.BadParameter(f"{text!r} is not a comma-separated list") from e
    if not values:
        raise click.BadParameter("list must not be empty")
    return values


def make_grid(lo: float, hi: float, points: int, spacing: str = "log") -> np.ndarray:
    if points < 1 or lo <= 0 or hi < lo:
        raise click.BadParameter(f"grid needs 0 < min <= max and points >= 1 (got {lo}, {hi}, {points})")
    if points > 1 and hi == lo:
        raise click.BadParameter(f"a grid of {points} points needs min < max (got {lo} twice)")
    if points == 1:
        return np.array([lo])
    if spacing == "log":
        return np.logspace(np.log10(lo), np.log10(hi), points)
    return np.linspace(lo, hi, points)


def space_options(func):
    """--k, --p, --f, --table, --transform"""
    func = click.option("--transform", default=None, help="Basis transform file (square, comma-separated rows)")(func)
    func = click.option("--table", default=None, help="Symbol table for --f table (one real per line)")(func)
    func = click.option("--f", "f", type=click.Choice(SYMBOL_CHOICES), default="log", show_default=True, help="Symbol f(n)")(func)
    func = click.option("--p", "p", type=float, default=2.0, show_default=True, help="Exponent of l_{p,k}")(func)
    func = click.option("--k", "k", type=click.IntRange(min=1), default=1, show_default=True, help="Difference order")(func)
    return func


def run_options(func):
    """--seed, --threads, --out"""
    func = click.option("--out", default=None, help="CSV output path (default: stdout)")(func)
    func = click.option("--threads", type=click.IntRange(min=1), default=Config.THREADS, show_default=True, help="Worker threads for grid scans")(func)
    func = click.option("--seed", type=int, default=Config.SEED, show_default=True, help="Random seed")(func)
    return func


def build_generator(storage: LabStorage, k: int, p: float, f: str, table: Optional[str], transform: Optional[str], N: int) -> GeneratorConfig:
    basis = storage.load_transform(transform) if transform else BasisModel()
    space = SpaceConfig(k=k, p=p, basis=basis)
    if f == "table":
        if not table:
            raise click.UsageError("--f table needs --table PATH")
        symbol = storage.load_symbol_table(table)
    else:
        symbol = make_symbol(SymbolKind(f), N)
    return GeneratorConfig(space=space, symbol=symbol)


def parse_vector(text: str, N: int, seed: int) -> CoeffVec:
    """basis:n | ones | random"""
    kind, _, arg = text.partition(":")
    if kind == "basis":
        try:
            return CoeffVec.basis_vector(int(arg), N)
        except ValueError as e:
            raise click.BadParameter(f"basis vector needs an index, got {text!r}") from e
    if kind == "ones":
        return CoeffVec(entries=np.ones(N))
    if kind == "random":
        rng = np.random.default_rng(seed)
        return CoeffVec(entries=rng.standard_normal(N) + 1j * rng.standard_normal(N))
    raise click.BadParameter(f"vector must be basis:n, ones or random, got {text!r}")


def finish(ctx: click.Context, frame: pd.DataFrame, passed: bool, summary: str) -> int:
    """Write the CSV with its provenance line, print the summary, return the exit status"""
    params = ctx.params
    run = RunConfig(
        subcommand=ctx.info_name,
        flags={k: v for k, v in params.items() if k != "out"},
        N=params.get("N"),
        seed=params.get("seed", Config.SEED),
        out=params.get("out"),
    )
    ctx.obj["storage"].write_frame(frame, run, run.out)
    verdict = "PASS" if passed else "FAIL"
    click.echo(f"# {ctx.info_name}: {summary} [{verdict}]")
    if not passed:
        logger.warning("%s contract violated: %s", ctx.info_name, summary)
    return CONTRACT_PASSED if passed else CONTRACT_VIOLATED


def _slope_text(slope: Optional[float]) -> str:
    return "n/a" if slope is None else f"{slope:.4f}"


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

@click.group()
@click.option("--log-level", default=None, help="Logging level (default: HKLAB_LOG_LEVEL)")
@click.option("--data-dir", default=None, help="Directory searched for relative input files")
@click.pass_context
def lab(ctx: click.Context, log_level: Optional[str], data_dir: Optional[str]):
    """Numerical experiments on A_k = diag(i f(n)) in the sequence spaces H_k and l_{p,k}."""
    configure_logging(log_level)
    ctx.ensure_object(dict)
    ctx.obj["storage"] = LabStorage(data_dir)


@lab.command()
@click.option("--p", "p", type=float, default=2.0, show_default=True)
@click.option("--seq", type=click.Choice(["single-spike", "power", "random"]), default="single-spike", show_default=True)
@click.option("--exponent", type=float, default=-0.51, show_default=True, help="Exponent for --seq power")
@click.option("--N", "N", type=click.IntRange(min=1), default=100000, show_default=True)
@run_options
@click.pass_context
def hardy(ctx, p, seq, exponent, N, seed, threads, out):
    """Discrete Hardy ratio against the best constant (p/(p-1))^p."""
    ratio = hardy_ratio(p, hardy_sequence(seq, N, exponent=exponent, seed=seed))
    constant = hardy_constant(p)
    frame = pd.DataFrame({"p": [p], "seq": [seq], "N": [N], "ratio": [ratio], "constant": [constant]})
    return finish(ctx, frame, ratio < constant, f"ratio={ratio:.6f} constant={constant:.6f}")


@lab.command("sk-check")
@space_options
@click.option("--N", "N", type=click.IntRange(min=2), default=100000, show_default=True)
@run_options
@click.pass_context
def sk_check(ctx, k, p, f, table, transform, N, seed, threads, out):
    """Finite-window S_k diagnostics of the symbol."""
    g = build_generator(ctx.obj["storage"], k, p, f, table, None, N)
    report = sk_diagnostics(g.symbol, k, min(N, g.symbol.N_max))
    js = sorted(report.per_j_sup)
    frame = pd.DataFrame({
        "j": js,
        "sup": [report.per_j_sup[j] for j in js],
        "argmax_n": [report.argmax_n[j] for j in js],
        "resolved_limit": [report.resolved_limit[j] for j in js],
    })
    summary = f"C={report.C:.6g} unbounded={report.unbounded_flag} tends_to_infinity={report.tends_to_infinity_flag}"
    return finish(ctx, frame, not report.unbounded_flag, summary)


@lab.command("norm-group")
@space_options
@click.option("--N", "N", type=click.IntRange(min=1), default=4096, show_default=True)
@click.option("--t-min", type=float, default=1.0, show_default=True)
@click.option("--t-max", type=float, default=100.0, show_default=True)
@click.option("--points", type=click.IntRange(min=1), default=10, show_default=True)
@click.option("--spacing", type=click.Choice(["log", "linear"]), default="log", show_default=True)
@click.option("--method", type=click.Choice(METHOD_CHOICES), default="matrix-free", show_default=True)
@run_options
@click.pass_context
def norm_group(ctx, k, p, f, table, transform, N, t_min, t_max, points, spacing, method, seed, threads, out):
    """Growth of ||e^{A_k t}|| over a time grid."""
    g = build_generator(ctx.obj["storage"], k, p, f, table, transform, N)
    result = group_growth_scan(g, make_grid(t_min, t_max, points, spacing), N, method=NormMethod(method), threads=threads)
    frame = ctx.obj["storage"].scan_frame(result, "norm")
    return finish(ctx, frame, result.contract_passed, f"slope={_slope_text(result.fitted_slope)} g(t_max)={result.values[-1]:.6g}")


@lab.command("norm-resolvent")
@space_options
@click.option("--lambda", "lam", required=True, help="Spectral parameter, e.g. 0+2i")
@click.option("--N", "N", type=click.IntRange(min=1), default=10000, show_default=True)
@click.option("--method", type=click.Choice(METHOD_CHOICES), default="matrix-free", show_default=True)
@run_options
@click.pass_context
def norm_resolvent(ctx, k, p, f, table, transform, lam, N, method, seed, threads, out):
    """||(A_k - lambda)^{-1}|| with the spectral lower bound 1/dist(lambda, sigma_N)."""
    g = build_generator(ctx.obj["storage"], k, p, f, table, transform, N)
    value = parse_complex(lam)
    est = estimate_norm(g, OperatorSpec.resolvent(value), N, method=NormMethod(method), seed=seed)
    norm = est.value
    lower = 1.0 / spectrum_distance(g, value, N)
    # the closed form holds in H_1 only; a probed value is itself a lower bound
    upper = closed_form_resolvent_bound(g, value, N) if k == 1 and not est.lower_bound_only else float("nan")
    passed = norm >= lower - 1e-8 and (np.isnan(upper) or norm <= upper * (1.0 + 1e-9))
    frame = pd.DataFrame({
        "lambda_re": [value.real], "lambda_im": [value.imag],
        "norm": [norm], "lower_bound": [lower], "remark_bound": [upper],
        "lower_bound_only": [est.lower_bound_only],
    })
    kind = "norm lower bound" if est.lower_bound_only else "norm"
    return finish(ctx, frame, passed, f"{kind}={norm:.6g} lower_bound={lower:.6g}")


@lab.command()
@space_options
@click.option("--anchor-n", type=click.IntRange(min=1), default=1000, show_default=True)
@click.option("--a-min", type=float, default=1e-3, show_default=True)
@click.option("--a-max", type=float, default=1.0, show_default=True)
@click.option("--points", type=click.IntRange(min=1), default=20, show_default=True)
@click.option("--N", "N", type=click.IntRange(min=1), default=8192, show_default=True)
@click.option("--method", type=click.Choice(METHOD_CHOICES), default="matrix-free", show_default=True)
@run_options
@click.pass_context
def blowup(ctx, k, p, f, table, transform, anchor_n, a_min, a_max, points, N, method, seed, threads, out):
    """Resolvent blow-up along lambda = a + i f(anchor_n)."""
    g = build_generator(ctx.obj["storage"], k, p, f, table, transform, N)
    result = resolvent_blowup_scan(g, anchor_n, make_grid(a_min, a_max, points), N, method=NormMethod(method), threads=threads)
    frame = ctx.obj["storage"].scan_frame(result, "norm")
    return finish(ctx, frame, result.contract_passed, f"slope={_slope_text(result.fitted_slope)}")


@lab.command()
@click.option("--k", "k", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("--N", "N", type=click.IntRange(min=2), default=2000, show_default=True)
@click.option("--n-min", type=click.IntRange(min=1), default=4, show_default=True)
@click.option("--n-max", type=click.IntRange(min=1), default=100, show_default=True)
@click.option("--points", type=click.IntRange(min=2), default=20, show_default=True)
@run_options
@click.pass_context
def minimality(ctx, k, N, n_min, n_max, points, seed, threads, out):
    """dist(e_n, span of the other basis vectors) and its decay exponent."""
    if n_max > N or n_min >= n_max:
        raise click.BadParameter(f"need n-min < n-max <= N, got {n_min}, {n_max}, {N}")
    n_grid = sorted(set(np.unique(np.geomspace(n_min, n_max, points).round().astype(int)).tolist()))
    slope, residual, distances = minimality_decay_exponent(SpaceConfig(k=k), n_grid, N)
    reference = np.asarray(n_grid, dtype=float) ** -0.5
    frame = pd.DataFrame({"n": n_grid, "distance": distances, "n_pow_minus_half": reference})
    passed = k != 1 or bool(np.all(np.abs(distances / reference - 1.0) <= 0.2))
    return finish(ctx, frame, passed, f"decay exponent={slope:.4f} (residual {residual:.2e})")


@lab.command("partial-sums")
@click.option("--k", "k", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("--N", "N", type=click.IntRange(min=2), default=128, show_default=True)
@click.option("--blocks", "blocks_spec", default="uniform:1", show_default=True, help="uniform:K, random:K or file:PATH")
@click.option("--max-prefix", type=click.IntRange(min=1), default=None, help="Largest number of blocks in a prefix")
@click.option("--transform", default=None, help="Basis transform file")
@run_options
@click.pass_context
def partial_sums(ctx, k, N, blocks_spec, max_prefix, transform, seed, threads, out):
    """Norms of the partial-sum projections onto the first M blocks."""
    storage = ctx.obj["storage"]
    basis = storage.load_transform(transform) if transform else BasisModel()
    grouping = storage.load_grouping(blocks_spec, N, seed=seed)
    result = partial_sum_projection_norms(k, grouping, N, cfg=SpaceConfig(k=k, basis=basis), max_prefix=max_prefix, threads=threads)
    frame = storage.scan_frame(result, "norm")
    return finish(ctx, frame, result.contract_passed, f"||S_M|| at M={int(result.grid[-1])}: {result.values[-1]:.6g}, slope={_slope_text(result.fitted_slope)}")


@lab.command()
@click.option("--k", "k", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("--N", "N", type=click.IntRange(min=1), default=1000, show_default=True)
@click.option("--blocks", "blocks_spec", default="uniform:3", show_default=True, help="uniform:K, random:K or file:PATH")
@click.option("--transform", default=None, help="Basis transform file")
@run_options
@click.pass_context
def blocks(ctx, k, N, blocks_spec, transform, seed, threads, out):
    """Norm of every block indicator against the lower bound 1/sqrt(M)."""
    storage = ctx.obj["storage"]
    basis = storage.load_transform(transform) if transform else BasisModel()
    cfg = SpaceConfig(k=k, basis=basis)
    grouping = storage.load_grouping(blocks_spec, N, seed=seed)
    norms = block_norms(cfg, grouping)
    floor = block_norm_lower_bound(cfg)
    frame = pd.DataFrame({
        "block": range(1, len(grouping.blocks) + 1),
        "first": [b[0] for b in grouping.blocks],
        "last": [b[-1] for b in grouping.blocks],
        "size": [len(b) for b in grouping.blocks],
        "norm": norms,
        "lower_bound": floor,
    })
    passed = bool(min(norms) >= floor * (1.0 - 1e-12))
    return finish(ctx, frame, passed, f"min block norm={min(norms):.6g} bound={floor:.6g} K={grouping.max_block}")


@lab.command()
@space_options
@click.option("--lambda", "lam", default="1", show_default=True, help="Spectral parameter with Re > 0")
@click.option("--N", "N", type=click.IntRange(min=1), default=16, show_default=True)
@click.option("--T", "T", type=float, default=40.0, show_default=True, help="Integration horizon")
@click.option("--steps", type=click.IntRange(min=2), default=4000, show_default=True)
@click.option("--x", "x_spec", default="random", show_default=True, help="basis:n, ones or random")
@click.option("--measure-group", is_flag=True, help="Scale the tail bound by the measured ||e^{A_k T}||")
@run_options
@click.pass_context
def laplace(ctx, k, p, f, table, transform, lam, N, T, steps, x_spec, measure_group, seed, threads, out):
    """Laplace quadrature of the group against -R(lambda) x."""
    g = build_generator(ctx.obj["storage"], k, p, f, table, transform, N)
    value = parse_complex(lam)
    x = parse_vector(x_spec, N, seed)
    steps = richardson_steps(steps)
    quad = laplace_resolvent(g, value, x, T, steps)
    exact = resolvent_apply(g, value, x)
    error = float(np.linalg.norm(isometric_coordinates(g.space, quad.entries + exact.entries), ord=p))
    bound = laplace_error_bound(g, value, x, T, steps, measure_group=measure_group)
    frame = pd.DataFrame({"T": [T], "steps": [steps], "error": [error], **{key: [v] for key, v in bound.items()}})
    passed = error <= 10.0 * bound["total"]
    return finish(ctx, frame, passed, f"error={error:.3e} bound={bound['total']:.3e}")


@lab.command("integral-scan")
@space_options
@click.option("--N", "N", type=click.IntRange(min=1), default=64, show_default=True)
@click.option("--a-min", type=float, default=0.1, show_default=True)
@click.option("--a-max", type=float, default=10.0, show_default=True)
@click.option("--points", type=click.IntRange(min=1), default=9, show_default=True)
@click.option("--x", "x_spec", default="basis:1", show_default=True)
@click.option("--y", "y_spec", default=None, help="Second vector for the pairing and adjoint integrals")
@click.option("--S", "S", type=float, default=None, help="Half-width of the line segment (default: automatic)")
@click.option("--half-plane", type=click.Choice(["right", "left"]), default="right", show_default=True)
@run_options
@click.pass_context
def integral_scan(ctx, k, p, f, table, transform, N, a_min, a_max, points, x_spec, y_spec, S, half_plane, seed, threads, out):
    """Integrals of ||R(a+is) x||^2 and |<R(a+is)^2 x, y>| over s."""
    g = build_generator(ctx.obj["storage"], k, p, f, table, transform, N)
    x = parse_vector(x_spec, N, seed)
    y = parse_vector(y_spec, N, seed + 1) if y_spec else None
    result = vertical_integral_scan(g, make_grid(a_min, a_max, points), x, y, S=S, N=N, half_plane=half_plane, threads=threads)
    frame = ctx.obj["storage"].scan_frame(result, "integral")
    norm = result.columns["normalized"]
    return finish(ctx, frame, result.contract_passed, f"normalized max/last={max(norm) / norm[-1]:.4g}")


@lab.command("spectrum-map")
@space_options
@click.option("--N", "N", type=click.IntRange(min=1), default=128, show_default=True)
@click.option("--t", "t_list", default="1,3.141592653589793,10", show_default=True, help="Comma-separated times")
@click.option("--tol", type=float, default=1e-8, show_default=True)
@run_options
@click.pass_context
def spectrum_map(ctx, k, p, f, table, transform, N, t_list, tol, seed, threads, out):
    """Eigenvalues of the truncated group matrix against e^{i t f(n)}."""
    g = build_generator(ctx.obj["storage"], k, p, f, table, transform, N)
    times = parse_list(t_list)
    deviations = [spectral_mapping_deviation(g, t, N) for t in times]
    frame = pd.DataFrame({"t": times, "deviation": deviations})
    return finish(ctx, frame, max(deviations) <= tol, f"max deviation={max(deviations):.3e}")


@lab.command("nongen-witness")
@click.option("--N-list", "N_list", default="64,256,1024,4096", show_default=True)
@click.option("--t", "t", type=float, default=1.0, show_default=True)
@click.option("--f", "f", type=click.Choice(["sqrt-witness", "log", "iterated-log"]), default="sqrt-witness", show_default=True)
@click.option("--method", type=click.Choice(METHOD_CHOICES), default="matrix-free", show_default=True)
@run_options
@click.pass_context
def nongen_witness(ctx, N_list, t, f, method, seed, threads, out):
    """||e^{A_1 t}|| on growing truncations."""
    Ns = parse_list(N_list, int)
    result = nongeneration_witness(Ns, t, symbol_kind=SymbolKind(f), method=NormMethod(method), threads=threads)
    frame = ctx.obj["storage"].scan_frame(result, "norm")
    return finish(ctx, frame, result.contract_passed, f"values {result.values[0]:.6g} -> {result.values[-1]:.6g}, slope={_slope_text(result.fitted_slope)}")


def run(argv: Optional[List[str]] = None) -> int:
    """Invoke the command group and translate the outcome into an exit status"""
    try:
        status = lab.main(args=argv, prog_name="hklab", obj={}, standalone_mode=False)
    except click.UsageError as e:
        click.echo(f"Error: {e.format_message()}", err=True)
        if e.ctx is not None:
            click.echo(e.ctx.get_help(), err=True)
        return RUNTIME_ERROR
    except click.ClickException as e:
        click.echo(f"Error: {e.format_message()}", err=True)
        return RUNTIME_ERROR
    except click.exceptions.Abort:
        return RUNTIME_ERROR
    except LabError as e:
        click.echo(f"Error: {e}", err=True)
        return RUNTIME_ERROR
    except ValueError as e:
        # pydantic validation of configs built from flags
        click.echo(f"Error: invalid configuration: {e}", err=True)
        return RUNTIME_ERROR
    if status is None:
        return CONTRACT_PASSED
    return int(status)


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
