"""Diffusion benchmark driver: runs the low-rank solvers on one system,
collects per-rank (or per-iteration) error metrics against the brute-force
reference, and emits CSV tables, a summary JSON and convergence figures.

All numerical output is deterministic for a fixed seed; wall-clock timings
are collected only when explicitly requested so the CSV bytes are
reproducible run to run.
"""

import json
import time
from pathlib import Path

import numpy as np

from . import io as tio
from .formats import pad_rank, to_dense
from .optimize import OptimOptions
from .parametric import (
    build_diffusion,
    energy,
    full_solve,
    merge_parameter_modes,
    residual_error,
)
from .solvers import eim_greedy, minres_lr, pgd_galerkin, pgd_subspace, pod, richardson_lr

SOLVER_NAMES = ("pgd-subspace", "pgd-galerkin", "pod", "eim", "richardson", "minres")

CSV_FIELDS = ("rank_or_iter", "residual", "energy_gap", "sup_error", "wallclock_ms")


def _error_metrics(om, ref_flat, w_flat):
    diff = w_flat - ref_flat
    per_point = np.sqrt(np.sum(diff**2, axis=1))
    weighted = float(np.sqrt(np.sum(om * per_point**2)))
    return weighted, float(per_point.max())


def run_benchmark(
    outdir,
    nel=32,
    d=3,
    k=5,
    kappa0=1.0,
    seed=0,
    solvers=SOLVER_NAMES,
    rmax=8,
    eps=1e-6,
    max_iter=4000,
    timings=False,
    plot=True,
):
    """Run the selected solvers on one diffusion instance and write the
    report (reference tensor, per-solver CSVs, summary JSON, figures)."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    unknown = [s for s in solvers if s not in SOLVER_NAMES]
    if unknown:
        raise ValueError(f"unknown solvers: {unknown}; available: {list(SOLVER_NAMES)}")

    sys_, bench = build_diffusion(nel, d, kappa0, K_per_dim=k)
    merged = merge_parameter_modes(sys_)
    ref = full_solve(sys_)
    tio.save_dense(outdir / "reference.dt1", ref)

    om = sys_.weights_flat()
    ref_flat = ref.reshape(sys_.n_grid, sys_.N)
    j_ref = energy(sys_, ref)
    rmax = int(min(rmax, sys_.n_grid, sys_.N))

    # best rank-r error in the weighted 2-norm, from the scaled flattening
    sv = np.linalg.svd(np.sqrt(om)[:, None] * ref_flat, compute_uv=False)
    tails = np.sqrt(np.concatenate([np.cumsum((sv**2)[::-1])[::-1], [0.0]]))
    rho = [float(tails[r]) for r in range(1, rmax + 1)]

    lo, hi = sys_.rayleigh_extremes(sys_.operators[0])
    system_info = {
        "n_el": nel,
        "d": d,
        "K_per_dim": list(bench.K_per_dim),
        "kappa0": kappa0,
        "state_dim": sys_.N,
        "grid_points": sys_.n_grid,
        "kappa_bounds": list(bench.kappa_bounds()),
        "rayleigh_extremes_vs_mean_operator": [lo, hi],
        "seed": seed,
    }
    with open(outdir / "system.json", "w") as fh:
        json.dump(system_info, fh, indent=1, sort_keys=True)
        fh.write("\n")

    opts = OptimOptions(max_sweeps=50, stagnation_tol=1e-10, restarts=3, seed=seed)
    summary = {"system": system_info, "rho_weighted2": rho, "solvers": {}}
    curves = []

    def finish(name, rows, elapsed_ms):
        if not timings:
            for row in rows:
                row["wallclock_ms"] = None
        meta = {"solver": name, "nel": nel, "d": d, "k": k, "kappa0": kappa0, "seed": seed}
        tio.write_csv(outdir / f"{name}.csv", CSV_FIELDS, rows, meta=meta)
        entry = {
            "rank_or_iter": [row["rank_or_iter"] for row in rows],
            "residual": [row["residual"] for row in rows],
            "energy_gap": [row["energy_gap"] for row in rows],
            "sup_error": [row["sup_error"] for row in rows],
            "weighted2_error": [row.get("weighted2_error") for row in rows],
        }
        if timings:
            entry["wallclock_ms"] = elapsed_ms
        summary["solvers"][name] = entry

    if "pgd-subspace" in solvers:
        t0 = time.perf_counter()
        sol, models, trace = pgd_subspace(sys_, rmax, opts)
        elapsed = 1e3 * (time.perf_counter() - t0)
        rows = []
        for row, model in zip(trace.rows, models):
            basis = sol.spatial_basis[:, : model.rank]
            coeff = model.solve_on_grid(sys_)
            w2, sup = _error_metrics(om, ref_flat, coeff @ basis.T)
            rows.append(
                {
                    "rank_or_iter": model.rank,
                    "residual": row["objective"],
                    "energy_gap": row["energy"] - j_ref,
                    "sup_error": sup,
                    "weighted2_error": w2,
                    "wallclock_ms": elapsed,
                }
            )
        finish("pgd-subspace", rows, elapsed)
        curves.append(("pgd-subspace", [r["rank_or_iter"] for r in rows], [r["weighted2_error"] for r in rows]))

    if "pgd-galerkin" in solvers:
        t0 = time.perf_counter()
        sol, trace = pgd_galerkin(sys_, rmax, opts)
        elapsed = 1e3 * (time.perf_counter() - t0)
        rows = []
        for row in trace.rows:
            r = row["ranks"][0]
            w_flat = sol.coefficients[:, :r] @ sol.spatial_basis[:, :r].T
            w2, sup = _error_metrics(om, ref_flat, w_flat)
            rows.append(
                {
                    "rank_or_iter": r,
                    "residual": row["objective"],
                    "energy_gap": row["energy"] - j_ref,
                    "sup_error": sup,
                    "weighted2_error": w2,
                    "wallclock_ms": elapsed,
                }
            )
        finish("pgd-galerkin", rows, elapsed)
        curves.append(("pgd-galerkin", [r["rank_or_iter"] for r in rows], [r["weighted2_error"] for r in rows]))

    if "pod" in solvers:
        t0 = time.perf_counter()
        basis_full, _, _ = pod(ref, rmax, weights=om)
        rows = []
        for r in range(1, rmax + 1):
            basis = basis_full[:, :r]
            proj = ref_flat @ basis @ basis.T
            w2, sup = _error_metrics(om, ref_flat, proj)
            proj_t = proj.reshape(ref.shape)
            rows.append(
                {
                    "rank_or_iter": r,
                    "residual": residual_error(sys_, proj_t),
                    "energy_gap": energy(sys_, proj_t) - j_ref,
                    "sup_error": sup,
                    "weighted2_error": w2,
                }
            )
        elapsed = 1e3 * (time.perf_counter() - t0)
        finish("pod", rows, elapsed)
        curves.append(("pod", [r["rank_or_iter"] for r in rows], [r["weighted2_error"] for r in rows]))

    if "eim" in solvers:
        t0 = time.perf_counter()
        basis_full, _, _ = eim_greedy(ref, rmax)
        rows = []
        for r in range(1, basis_full.shape[1] + 1):
            basis = basis_full[:, :r]
            proj = ref_flat @ basis @ basis.T
            w2, sup = _error_metrics(om, ref_flat, proj)
            proj_t = proj.reshape(ref.shape)
            rows.append(
                {
                    "rank_or_iter": r,
                    "residual": residual_error(sys_, proj_t),
                    "energy_gap": energy(sys_, proj_t) - j_ref,
                    "sup_error": sup,
                    "weighted2_error": w2,
                }
            )
        elapsed = 1e3 * (time.perf_counter() - t0)
        finish("eim", rows, elapsed)
        curves.append(("eim (sup greedy)", [r["rank_or_iter"] for r in rows], [r["weighted2_error"] for r in rows]))

    if "richardson" in solvers:
        t0 = time.perf_counter()
        sol, trace = richardson_lr(merged, eps=eps, max_iter=max_iter)
        elapsed = 1e3 * (time.perf_counter() - t0)
        tio.save_format(outdir / "richardson_solution.json", sol)
        w_flat = to_dense(sol).reshape(sys_.n_grid, sys_.N)
        w2_final, sup_final = _error_metrics(om, ref_flat, w_flat)
        rows = []
        for row in trace.rows:
            rows.append(
                {
                    "rank_or_iter": row["step"],
                    "residual": row["objective"],
                    "energy_gap": None,
                    "sup_error": None,
                    "weighted2_error": None,
                }
            )
        rows[-1]["energy_gap"] = energy(sys_, w_flat.reshape(ref.shape)) - j_ref
        rows[-1]["sup_error"] = sup_final
        rows[-1]["weighted2_error"] = w2_final
        finish("richardson", rows, elapsed)

    if "minres" in solvers:
        t0 = time.perf_counter()
        rows = []
        prev = None
        for r in range(1, rmax + 1):
            init = pad_rank(prev, (r,)) if prev is not None else None
            x, trace = minres_lr(merged, "tt", (r,), opts, init=init)
            prev = x
            w_flat = to_dense(x).reshape(sys_.n_grid, sys_.N)
            w2, sup = _error_metrics(om, ref_flat, w_flat)
            rows.append(
                {
                    "rank_or_iter": r,
                    "residual": trace.rows[-1]["objective"],
                    "energy_gap": energy(sys_, w_flat.reshape(ref.shape)) - j_ref,
                    "sup_error": sup,
                    "weighted2_error": w2,
                }
            )
        elapsed = 1e3 * (time.perf_counter() - t0)
        tio.save_format(outdir / "minres_solution.json", prev)
        finish("minres", rows, elapsed)
        curves.append(("minres", [r["rank_or_iter"] for r in rows], [r["weighted2_error"] for r in rows]))

    with open(outdir / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=1, sort_keys=True)
        fh.write("\n")

    if plot:
        from . import report

        if curves:
            report.render_convergence(
                outdir / "convergence.png",
                curves,
                lower_bound=(list(range(1, rmax + 1)), rho),
            )
        report.render_spectrum(outdir / "spectrum.png", sv)
        if "richardson" in solvers and "richardson" in summary["solvers"]:
            rich = summary["solvers"]["richardson"]
            report.render_convergence(
                outdir / "richardson.png",
                [("richardson residual", rich["rank_or_iter"], rich["residual"])],
                ylabel="weighted residual",
            )
    return summary
