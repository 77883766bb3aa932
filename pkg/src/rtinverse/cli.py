"""Command line front end: forward runs, reconstructions, self tests.

Exit codes: 0 success, 2 configuration error, 3 non-contractive scattering,
4 self-test failure. Every run writes a manifest listing the artifacts with
content hashes so downstream tooling can verify what it reads.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import io as rio
from .config import ConfigError, ExperimentConfig, example_config, load_config
from .fields import ScalarField, random_bump_field
from .geometry import santalo_integral
from .inversion import (MaxIterReached, ReconConfig, choose_alpha_discrepancy,
                        reconstruct, stability_probe)
from .measurement import (BoundarySinogram, MeasurementOperator,
                          apply_I_sigma, boundary_trace_T1_inv)
from .transport import NonContractiveError, TransportConfig, solve_forward

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NONCONTRACTIVE = 3
EXIT_SELFTEST = 4


def _l2_omega(domain, field: ScalarField, ref: ScalarField) -> dict:
    """Relative L2 and max error of field vs ref over Omega."""
    mask = domain.contains(ref.nodes(), on="omega").reshape(ref.nx, ref.ny)
    diff = (field.values - ref.values)[mask]
    base = ref.values[mask]
    nb = float(np.linalg.norm(base))
    nd = float(np.linalg.norm(diff))
    rel = nd / nb if nb > 0 else nd
    mref = float(np.max(np.abs(base))) if nb > 0 else 1.0
    return {"rel_l2": rel, "max_abs": float(np.max(np.abs(diff))),
            "max_rel": float(np.max(np.abs(diff))) / mref}


def _add_noise(g: np.ndarray, noise: dict, seed: int):
    """Additive Gaussian noise relative to max |g|; returns (noisy, sigma_norm_of_noise_fn)."""
    if noise["kind"] == "none":
        return g, None
    rng = np.random.default_rng(seed)
    scale = noise["rel_level"] * float(np.max(np.abs(g)))
    pert = scale * rng.standard_normal(g.shape)
    return g + pert, pert


def _make_data(cfg: ExperimentConfig, domain, grid):
    """Synthetic sinogram from the fine-grid operator, plus ground truth."""
    sigma_f = cfg.build_sigma(domain, which="data")
    kernel = cfg.build_kernel()
    op_f = MeasurementOperator(sigma_f, kernel, grid, cfg.transport)
    phantom_f = cfg.build_phantom(domain, which="data")
    g = op_f.forward(phantom_f)
    return g, phantom_f, kernel


def cmd_forward(cfg: ExperimentConfig, out_dir: Path) -> int:
    domain = cfg.build_domain()
    grid = cfg.build_boundary_grid(domain)
    sigma = cfg.build_sigma(domain, which="recon")
    kernel = cfg.build_kernel()
    phantom = cfg.build_phantom(domain, which="recon")
    t0 = time.time()
    sol = solve_forward(sigma, kernel, phantom, cfg.transport)
    t_solve = time.time() - t0
    t0 = time.time()
    op = MeasurementOperator(sigma, kernel, grid, cfg.transport)
    sino = op.forward(phantom)
    t_measure = time.time() - t0

    out_dir.mkdir(parents=True, exist_ok=True)
    files = []
    files += rio.write_field(out_dir / "u", sol.u, kind="phase_solution")
    files += rio.write_sinogram(out_dir / "sinogram", sino)
    hist = out_dir / "forward_history.csv"
    with hist.open("w") as fh:
        fh.write("term,rel_magnitude\n")
        for i, r in enumerate(sol.residual_history, start=1):
            fh.write("%d,%.17g\n" % (i, r))
    files.append(hist)
    cfg_path = out_dir / "config.json"
    cfg_path.write_text(cfg.canonical_json() + "\n")
    files.append(cfg_path)
    rio.write_manifest(out_dir / "manifest.json", cfg.sha256(), files,
                       {"solve": t_solve, "measure": t_measure},
                       extra={"command": "forward",
                              "neumann_terms": sol.iterations,
                              "contraction_ratio": op.contraction_ratio})
    print(f"forward: {sol.iterations} series terms, sinogram "
          f"max {float(np.max(np.abs(sino.values))):.6g}, wrote {out_dir}")
    return EXIT_OK


def cmd_reconstruct(cfg: ExperimentConfig, out_dir: Path) -> int:
    domain = cfg.build_domain()
    grid = cfg.build_boundary_grid(domain)
    t0 = time.time()
    g_clean, _, kernel = _make_data(cfg, domain, grid)
    t_data = time.time() - t0

    noisy, pert = _add_noise(np.asarray(g_clean.values), cfg.noise, cfg.seed)
    g = BoundarySinogram(grid, noisy)
    sigma = cfg.build_sigma(domain, which="recon")
    truth = cfg.build_phantom(domain, which="recon")

    t0 = time.time()
    op = MeasurementOperator(sigma, kernel, grid, cfg.transport)
    if pert is not None:
        noise_norm = math.sqrt(float(np.sum(grid.weight * pert ** 2)))
        result = choose_alpha_discrepancy(sigma, kernel, g, noise_norm,
                                          cfg.transport, cfg.recon, operator=op)
    else:
        try:
            result = reconstruct(sigma, kernel, g, cfg.transport, cfg.recon,
                                 operator=op)
        except MaxIterReached as e:
            result = e.result
    t_recon = time.time() - t0

    metrics = _l2_omega(domain, result.f_hat, truth)
    metrics.update({"iterations": result.iterations, "status": result.status,
                    "tikhonov_alpha": result.alpha})

    out_dir.mkdir(parents=True, exist_ok=True)
    files = []
    files += rio.write_field(out_dir / "f_hat", result.f_hat, kind="reconstruction")
    files += rio.write_field(out_dir / "f_true", truth, kind="phantom")
    files += rio.write_sinogram(out_dir / "data", g)
    files.append(rio.write_residuals(out_dir / "residuals.csv", result.residuals))
    met_path = out_dir / "metrics.json"
    met_path.write_text(json.dumps(metrics, sort_keys=True) + "\n")
    files.append(met_path)
    cfg_path = out_dir / "config.json"
    cfg_path.write_text(cfg.canonical_json() + "\n")
    files.append(cfg_path)
    rio.write_manifest(out_dir / "manifest.json", cfg.sha256(), files,
                       {"data_gen": t_data, "reconstruct": t_recon},
                       extra={"command": "reconstruct"})
    print(f"reconstruct: rel_l2={metrics['rel_l2']:.4g} "
          f"iters={result.iterations} status={result.status} alpha={result.alpha:.4g}")
    return EXIT_OK


# -- self test ---------------------------------------------------------------


def _smooth_integrands(domain, n_theta: int):
    """Three compactly supported phase-space fields for the Santalo check."""
    from .fields import PhaseField
    a1, b1 = domain.semi_axes("omega1")
    cx, cy = domain.center
    n = 96
    xs = np.linspace(cx - a1, cx + a1, n)
    ys = np.linspace(cy - b1, cy + b1, n)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    rho2 = ((gx - cx) / a1) ** 2 + ((gy - cy) / b1) ** 2
    # C^1 radial bump vanishing on the Omega_1 boundary
    bump = np.maximum(1.0 - rho2, 0.0) ** 2
    th = np.arange(n_theta) * (2.0 * np.pi / n_theta)
    bbox = (cx - a1, cx + a1, cy - b1, cy + b1)
    fields = [
        PhaseField(bump[:, :, None] * np.ones(n_theta), bbox),
        PhaseField(bump[:, :, None] * (1.0 + 0.5 * np.cos(th)), bbox),
        PhaseField((bump * (1.0 + 0.3 * gx))[:, :, None]
                   * (1.0 + 0.25 * np.sin(2 * th)), bbox),
    ]
    return fields, xs, ys, th


def selftest_santalo(domain, grid, ray_step: float = 2e-3):
    """Two-sided Santalo identity on three smooth integrands.

    Returns (status, detail) where status is PASS, FAIL or SKIP; a grid
    whose weights carry no mass (tangent rays only) degenerates to SKIP.
    """
    if float(np.sum(grid.weight)) <= 1e-14:
        return "SKIP", "boundary grid carries zero Sigma mass (tangent rays only)"
    fields, xs, ys, th = _smooth_integrands(domain, 64)
    inside = domain.contains(
        np.stack(np.meshgrid(xs, ys, indexing="ij"), axis=-1).reshape(-1, 2),
        on="omega1").reshape(len(xs), len(ys))
    cell = (xs[1] - xs[0]) * (ys[1] - ys[0])
    d_th = 2.0 * np.pi / len(th)
    worst = 0.0
    for fld in fields:
        lhs = santalo_integral(domain, fld, grid, ray_step=ray_step)
        rhs = float(np.sum(fld.values[inside] * cell * d_th))
        worst = max(worst, abs(lhs - rhs) / abs(rhs))
    status = "PASS" if worst < 0.01 else "FAIL"
    return status, f"two-sided rel gap {worst:.3e} (< 1e-2)"


def selftest_adjoint(sigma, kernel, grid, tcfg, n_pairs: int = 5,
                     break_adjoint: bool = False):
    op = MeasurementOperator(sigma, kernel, grid, tcfg)
    rng = np.random.default_rng(7)
    nx, ny = sigma.values.shape[:2]
    worst = 0.0
    for _ in range(n_pairs):
        f = ScalarField(rng.standard_normal((nx, ny)), sigma.bbox)
        gv = rng.standard_normal(len(grid))
        xf = op.forward(f)
        xg = op.adjoint(gv).values
        if break_adjoint:
            xg = xg * (1.0 + 1e-6)
        lhs = float(np.sum(grid.weight * xf.values * gv))
        rhs = float(np.sum(f.values * xg)) * f.dx * f.dy
        # norms in the pairing measures, else the gap is scaled by cell area
        nf = math.sqrt(float(np.sum(f.values ** 2)) * f.dx * f.dy)
        ng = math.sqrt(float(np.sum(grid.weight * gv ** 2)))
        worst = max(worst, abs(lhs - rhs) / (nf * ng))
    status = "PASS" if worst < 1e-10 else "FAIL"
    return status, f"max adjoint gap {worst:.3e} (< 1e-10)"


def selftest_diam_bound(sigma, grid, tcfg, n_sources: int = 50):
    domain = grid.domain
    diam = domain.diameter("omega1")
    rng = np.random.default_rng(11)
    nx, ny = sigma.values.shape[:2]
    blank = ScalarField(np.zeros((nx, ny)), sigma.bbox)
    inside = domain.contains(blank.nodes(), on="omega1").reshape(nx, ny)
    cell = blank.dx * blank.dy
    d_th = 2.0 * np.pi / sigma.n_theta
    worst = 0.0
    for _ in range(n_sources):
        gv = rng.standard_normal(sigma.values.shape) * inside[:, :, None]
        tr = boundary_trace_T1_inv(sigma, sigma.with_values(gv), grid, tcfg)
        lhs = float(np.sum(grid.weight * tr.values ** 2))
        rhs = diam * float(np.sum(gv ** 2)) * cell * d_th
        worst = max(worst, lhs / rhs)
    status = "PASS" if worst <= 1.0 + 1e-6 else "FAIL"
    return status, f"max trace-to-bound ratio {worst:.6f} (<= 1 + 1e-6)"


def selftest_k0(sigma, grid, tcfg):
    rng = np.random.default_rng(13)
    nx, ny = sigma.values.shape[:2]
    f = ScalarField(rng.standard_normal((nx, ny)), sigma.bbox)
    op0 = MeasurementOperator(sigma, None, grid, tcfg)
    xf = op0.forward(f)
    isf = apply_I_sigma(sigma, f, grid, tcfg)
    num = math.sqrt(float(np.sum(grid.weight * (xf.values - isf.values) ** 2)))
    den = math.sqrt(float(np.sum(grid.weight * isf.values ** 2)))
    rel = num / den if den > 0 else num
    status = "PASS" if rel < 1e-6 else "FAIL"
    return status, f"k=0 Sigma-norm gap {rel:.3e} (< 1e-6)"


def cmd_selftest(cfg: ExperimentConfig, break_adjoint: bool = False) -> int:
    domain = cfg.build_domain()
    grid = cfg.build_boundary_grid(domain)
    sigma = cfg.build_sigma(domain, which="recon")
    kernel = cfg.build_kernel()
    checks = [
        ("santalo", lambda: selftest_santalo(domain, grid)),
        ("adjoint", lambda: selftest_adjoint(sigma, kernel, grid, cfg.transport,
                                             break_adjoint=break_adjoint)),
        ("diam_bound", lambda: selftest_diam_bound(sigma, grid, cfg.transport)),
        ("k0_reduction", lambda: selftest_k0(sigma, grid, cfg.transport)),
    ]
    failed = False
    for name, run in checks:
        try:
            status, detail = run()
        except NonContractiveError as e:
            status, detail = "FAIL", f"non-contractive: {e}"
        if status == "SKIP":
            print(f"WARNING {name}: {detail}")
            continue
        print(f"{status} {name}: {detail}")
        failed = failed or status != "PASS"
    return EXIT_SELFTEST if failed else EXIT_OK


def cmd_adjoint_test(cfg: ExperimentConfig) -> int:
    domain = cfg.build_domain()
    grid = cfg.build_boundary_grid(domain)
    sigma = cfg.build_sigma(domain, which="recon")
    status, detail = selftest_adjoint(sigma, cfg.build_kernel(), grid,
                                      cfg.transport, n_pairs=10)
    print(f"{status} adjoint: {detail}")
    return EXIT_OK if status == "PASS" else EXIT_SELFTEST


def cmd_lambda_sweep(cfg: ExperimentConfig, lambdas, out_dir: Path) -> int:
    if cfg.kernel["kind"] == "none":
        print("lambda-sweep needs a scattering kernel in the config",
              file=sys.stderr)
        return EXIT_CONFIG
    domain = cfg.build_domain()
    grid = cfg.build_boundary_grid(domain)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for lam in lambdas:
        tcfg = replace(cfg.transport, lambda_scale=float(lam))
        row = {"lam": float(lam), "ratio": math.nan, "n_terms": 0,
               "rel_l2": math.nan, "iterations": 0,
               "c_estimate": math.nan, "sigma_min": math.nan, "status": "ok"}
        try:
            sub = replace(cfg, transport=tcfg)
            g_clean, _, kernel = _make_data(sub, domain, grid)
            noisy, pert = _add_noise(np.asarray(g_clean.values), cfg.noise,
                                     cfg.seed)
            g = BoundarySinogram(grid, noisy)
            sigma = cfg.build_sigma(domain, which="recon")
            op = MeasurementOperator(sigma, kernel, grid, tcfg)
            row["ratio"] = op.contraction_ratio
            row["n_terms"] = op.n_terms
            try:
                res = reconstruct(sigma, kernel, g, tcfg, cfg.recon, operator=op)
            except MaxIterReached as e:
                res = e.result
            truth = cfg.build_phantom(domain, which="recon")
            row["rel_l2"] = _l2_omega(domain, res.f_hat, truth)["rel_l2"]
            row["iterations"] = res.iterations
            probe = stability_probe(sigma, kernel, grid, tcfg, n_probe=4)
            row["c_estimate"] = probe.c_estimate
            row["sigma_min"] = probe.sigma_min
        except NonContractiveError:
            row["status"] = "noncontractive"
        except (ValueError, RuntimeError) as e:
            row["status"] = f"error: {e}"
        rows.append(row)
        print(f"lambda={lam}: status={row['status']} ratio={row['ratio']:.4g} "
              f"rel_l2={row['rel_l2']:.4g}")
    csv_path = out_dir / "lambda_sweep.csv"
    with csv_path.open("w") as fh:
        fh.write("lambda,ratio,n_terms,rel_l2,iterations,c_estimate,sigma_min,status\n")
        for r in rows:
            fh.write("%.17g,%.17g,%d,%.17g,%d,%.17g,%.17g,%s\n" % (
                r["lam"], r["ratio"], r["n_terms"], r["rel_l2"],
                r["iterations"], r["c_estimate"], r["sigma_min"], r["status"]))
    rio.write_manifest(out_dir / "manifest.json", cfg.sha256(), [csv_path],
                       {}, extra={"command": "lambda-sweep"})
    print(f"wrote {csv_path}")
    return EXIT_OK


# -- entry point ---------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="rtinverse",
        description="Forward transport runs and inverse-source reconstructions "
                    "on convex domains.")
    sub = p.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None,
                        help="JSON experiment config (defaults to the bundled example)")
    common.add_argument("--output", type=Path, default=None,
                        help="output directory (overrides config output_dir)")
    common.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
    common.add_argument("--threads", type=int, default=None,
                        help="worker thread count for the sweep kernels")
    common.add_argument("--measure-on", choices=("omega", "omega1"),
                        default=None, help="measuring boundary override")
    sub.add_parser("forward", parents=[common],
                   help="solve the direct problem and write u, Xf")
    sub.add_parser("reconstruct", parents=[common],
                   help="generate data on the fine grid and reconstruct the source")
    st = sub.add_parser("selftest", parents=[common],
                        help="run the invariant suite (Santalo, adjoint, bounds)")
    st.add_argument("--break-adjoint", action="store_true",
                    help=argparse.SUPPRESS)
    sw = sub.add_parser("lambda-sweep", parents=[common],
                        help="scan the kernel scaling lambda")
    sw.add_argument("--lambdas", type=str, default="0,0.5,1.0",
                    help="comma-separated lambda values")
    sub.add_parser("adjoint-test", parents=[common],
                   help="adjoint pairing identity on the configured operator")
    sub.add_parser("example-config", parents=[common],
                   help="print the bundled example config to stdout")
    return p


def _load(args) -> ExperimentConfig:
    if args.config is None:
        cfg = ExperimentConfig.from_dict(example_config())
    else:
        cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=int(args.seed))
    if args.output is not None:
        cfg = replace(cfg, output_dir=str(args.output))
    if args.measure_on is not None:
        cfg = replace(cfg, boundary={**cfg.boundary, "measure_on": args.measure_on})
    return cfg


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.threads is not None:
        try:
            import numba
            numba.set_num_threads(max(1, args.threads))
        except ImportError:
            pass
    try:
        cfg = _load(args)
        out_dir = Path(cfg.output_dir)
        if args.command == "example-config":
            print(json.dumps(example_config(), indent=2, sort_keys=True))
            return EXIT_OK
        if args.command == "forward":
            return cmd_forward(cfg, out_dir)
        if args.command == "reconstruct":
            return cmd_reconstruct(cfg, out_dir)
        if args.command == "selftest":
            return cmd_selftest(cfg, break_adjoint=args.break_adjoint)
        if args.command == "adjoint-test":
            return cmd_adjoint_test(cfg)
        if args.command == "lambda-sweep":
            lambdas = [float(s) for s in args.lambdas.split(",") if s.strip()]
            if not lambdas:
                print("empty --lambdas list", file=sys.stderr)
                return EXIT_CONFIG
            return cmd_lambda_sweep(cfg, lambdas, out_dir)
        raise AssertionError(f"unhandled command {args.command}")
    except ConfigError as e:
        print(f"config error at {e.path}: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except NonContractiveError as e:
        print(f"non-contractive scattering: {e}", file=sys.stderr)
        return EXIT_NONCONTRACTIVE


if __name__ == "__main__":
    sys.exit(main())
