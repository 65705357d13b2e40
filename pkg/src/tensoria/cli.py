"""Command-line frontend: tensor inspection, decomposition, least-squares
fitting, and the diffusion benchmark with its convergence report.

Exit codes: 0 success, 2 I/O error, 3 domain or validation error, 4 numerical
failure (divergence).  The environment variable TENSORIA_SEED overrides the
default seed 0.
"""

import json
import os
import sys

import click
import numpy as np

from . import io as tio
from .bench import SOLVER_NAMES, run_benchmark
from .decompose import tree_hosvd, truncate
from .formats import format_name, param_count, to_dense
from .dense import norm
from .optimize import OptimOptions, least_squares_fit, legendre_basis, predict
from .solvers import DivergenceError
from .tree import DimensionTree


def _default_seed():
    try:
        return int(os.environ.get("TENSORIA_SEED", "0"))
    except ValueError:
        return 0


def _fail(code, message):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _guarded(fn):
    try:
        fn()
    except DivergenceError as exc:
        _fail(4, str(exc))
    except np.linalg.LinAlgError as exc:
        _fail(4, str(exc))
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        _fail(2, str(exc))
    except OSError as exc:
        _fail(2, str(exc))
    except ValueError as exc:
        _fail(3, str(exc))


def _parse_rank(text):
    return tuple(int(p) for p in text.split(",") if p != "")


@click.group()
def main():
    """Low-rank tensor toolkit."""


@main.command()
@click.option("--in", "in_path", required=True, help="input tensor (.dt1 or .json)")
@click.option("--format", "fmt", required=True, type=click.Choice(["tucker", "tt", "tree"]))
@click.option("--rank", default=None, help="comma-separated ranks (one int for tree)")
@click.option("--eps", default=None, type=float, help="relative error tolerance")
@click.option("--tree", "tree_kind", default="balanced", type=click.Choice(["balanced", "linear"]))
@click.option("--out", "out_path", required=True, help="output low-rank JSON")
@click.option("--report", "report_path", default=None, help="truncation report JSON")
def decompose(in_path, fmt, rank, eps, tree_kind, out_path, report_path):
    """Compress a dense tensor into a low-rank format."""

    def work():
        if (rank is None) == (eps is None):
            raise ValueError("give exactly one of --rank and --eps")
        if not os.path.exists(in_path):
            raise FileNotFoundError(in_path)
        u = tio.load_dense(in_path)
        if rank is not None:
            ranks = _parse_rank(rank)
            if fmt == "tucker":
                from .decompose import hosvd

                x, rep = hosvd(u, ranks)
            elif fmt == "tt":
                from .decompose import tt_svd

                x, rep = tt_svd(u, ranks)
            else:
                tree = (
                    DimensionTree.balanced(u.ndim)
                    if tree_kind == "balanced"
                    else DimensionTree.linear(u.ndim)
                )
                if len(ranks) != 1:
                    raise ValueError("tree decomposition takes a single uniform rank")
                x, rep = tree_hosvd(u, tree, ranks[0])
        else:
            if fmt == "tree":
                raise ValueError("eps-driven truncation supports the tucker and tt formats")
            x, rep = truncate(u, eps, fmt)
        tio.save_format(out_path, x)
        if report_path:
            payload = {
                "achieved_error": rep.achieved_error,
                "ranks_used": list(rep.ranks_used),
                "bound_constant": rep.bound_constant,
                "notes": list(rep.notes),
            }
            with open(report_path, "w") as fh:
                json.dump(payload, fh, indent=1, sort_keys=True)
                fh.write("\n")
        click.echo(
            f"wrote {out_path}: {fmt} ranks {tuple(rep.ranks_used)} "
            f"error {tio.format_float(rep.achieved_error)}"
        )

    _guarded(work)


@main.command()
@click.option("--points", "points_path", required=True, help="CSV of parameter points, one row each")
@click.option("--values", "values_path", required=True, help="CSV of scalar samples")
@click.option("--basis", required=True, help="per-dimension dictionary, e.g. legendre:5,5,5")
@click.option("--format", "fmt", default="cp", type=click.Choice(["cp", "tucker", "tt"]))
@click.option("--rank", default="1", help="comma-separated rank tuple (one int for cp)")
@click.option("--ridge", default=0.0, type=float)
@click.option("--seed", default=None, type=int)
@click.option("--out", "out_path", default="fitted.json")
@click.option("--trace", "trace_path", default=None, help="per-sweep objective CSV")
def fit(points_path, values_path, basis, fmt, rank, ridge, seed, out_path, trace_path):
    """Fit a low-rank coefficient tensor to scalar samples."""

    def work():
        for p in (points_path, values_path):
            if not os.path.exists(p):
                raise FileNotFoundError(p)
        try:
            points = tio.read_column_csv(points_path)
            values = tio.read_column_csv(values_path)
        except ValueError as exc:
            raise OSError(f"malformed CSV: {exc}") from exc
        values = values.reshape(-1)
        if points.shape[0] != values.shape[0]:
            raise OSError(
                f"points ({points.shape[0]} rows) and values ({values.shape[0]} rows) differ"
            )
        kind, _, sizes = basis.partition(":")
        if kind != "legendre" or not sizes:
            raise ValueError("basis must look like legendre:K1,K2,...")
        dims = _parse_rank(sizes)
        if points.shape[1] != len(dims):
            raise ValueError(
                f"points have {points.shape[1]} columns but the basis lists {len(dims)} sizes"
            )
        bases = [legendre_basis(kd) for kd in dims]
        ranks = _parse_rank(rank)
        rank_arg = ranks[0] if fmt == "cp" else ranks
        opts = OptimOptions(seed=_default_seed() if seed is None else seed)
        x, trace = least_squares_fit(
            points, values, bases, fmt=fmt, rank=rank_arg, ridge=ridge, opts=opts
        )
        tio.save_format(out_path, x)
        if trace_path:
            tio.write_csv(
                trace_path,
                ("step", "objective"),
                trace.rows,
                meta={"ridge": ridge, "format": fmt, "rank": ranks, "seed": opts.seed},
            )
        rmse = float(np.sqrt(np.mean((predict(x, bases, points) - values) ** 2)))
        click.echo(f"wrote {out_path}: rmse {tio.format_float(rmse)}")

    _guarded(work)


@main.command("benchmark-diffusion")
@click.option("--nel", default=32, type=int, help="number of mesh elements")
@click.option("--d", "d", default=3, type=int, help="number of random subdomains")
@click.option("--k", "k", default=5, type=int, help="collocation points per dimension")
@click.option("--kappa0", default=1.0, type=float)
@click.option("--rmax", default=8, type=int)
@click.option("--eps", default=1e-6, type=float, help="Richardson truncation tolerance")
@click.option("--solvers", default=",".join(SOLVER_NAMES), help="comma-separated solver list")
@click.option("--seed", default=None, type=int)
@click.option("--out", "out_dir", required=True, help="output directory")
@click.option("--timings/--no-timings", default=False, help="record wall-clock columns")
@click.option("--plot/--no-plot", default=True, help="render convergence figures")
@click.option("--threads", default=0, type=int, help="thread budget (outputs do not depend on it)")
def benchmark_diffusion(nel, d, k, kappa0, rmax, eps, solvers, seed, out_dir, timings, plot, threads):
    """Run the random-coefficient diffusion benchmark and write its report."""

    _ = threads  # accepted for interface stability; outputs never depend on it

    def work():
        wanted = tuple(s for s in solvers.split(",") if s)
        summary = run_benchmark(
            out_dir,
            nel=nel,
            d=d,
            k=k,
            kappa0=kappa0,
            seed=_default_seed() if seed is None else seed,
            solvers=wanted,
            rmax=rmax,
            eps=eps,
            timings=timings,
            plot=plot,
        )
        click.echo(f"wrote {out_dir}: {', '.join(sorted(summary['solvers']))}")

    _guarded(work)


@main.command()
@click.option("--in", "in_path", required=True)
def info(in_path):
    """Print tensor metadata."""

    def work():
        if not os.path.exists(in_path):
            raise FileNotFoundError(in_path)
        if in_path.endswith(".json"):
            with open(in_path) as fh:
                payload = json.load(fh)
            if "format" in payload:
                x = tio.format_from_json_dict(payload)
                click.echo(f"format: {format_name(x)}")
                click.echo(f"order: {len(x.shape)}")
                click.echo(f"dims: {','.join(str(n) for n in x.shape)}")
                click.echo(f"parameters: {param_count(x)}")
                click.echo(f"norm: {tio.format_float(norm(to_dense(x)))}")
                return
            u = tio.dense_from_json_dict(payload)
        else:
            u = tio.load_dense(in_path)
        click.echo("format: dense")
        click.echo(f"order: {u.ndim}")
        click.echo(f"dims: {','.join(str(n) for n in u.shape)}")
        click.echo(f"layout: row-major")
        click.echo(f"norm: {tio.format_float(norm(u))}")

    _guarded(work)


if __name__ == "__main__":
    main()
