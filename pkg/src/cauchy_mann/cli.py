"""``cauchy-mann`` command line: runs one experiment and writes CSVs, a plotting
script and a manifest into the output directory."""

from __future__ import annotations

import argparse
import csv
import os
import sys
from typing import Callable, Dict, List, Tuple

import numpy as np

from .errors import CauchyMannError, ConfigError
from .experiments import (
    EXPERIMENTS,
    ExperimentConfig,
    Problem,
    RunManifest,
    annulus_problem,
    emit_config,
    iteration_config,
    load_config,
    log_grid,
    rectangle_problem,
    relative_trace_errors,
    run_with_history,
)
from .iteration import IterationRecord, discrepancy_index
from .noise import (
    NoiseSpec,
    SmoothingOperator,
    perturb_cauchy_data,
    perturbed_affine_term,
    smooth_cauchy_data,
    write_perturbation_csv,
)
from .spectral import (
    SpectralOperator,
    run_rate_experiment,
    semi_convergence,
    stopping_law,
    variation,
)

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_CHECK = 0, 2, 3, 4

Check = Tuple[str, bool, str]


class Run:
    """Output directory plus manifest; every written file gets checksummed."""

    def __init__(self, cfg: ExperimentConfig, out_dir: str):
        os.makedirs(out_dir, exist_ok=True)
        self.cfg = cfg
        self.out = out_dir
        self.manifest = RunManifest(config=emit_config(cfg))
        self.checks: List[Check] = []

    def path(self, name: str) -> str:
        return os.path.join(self.out, name)

    def write_rows(self, name: str, header, rows) -> str:
        p = self.path(name)
        with open(p, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
        self.manifest.add_file(p)
        return p

    def register(self, p: str) -> None:
        self.manifest.add_file(p)

    def check(self, name: str, ok: bool, detail: str = "") -> None:
        self.checks.append((name, bool(ok), detail))

    def finish(self) -> str:
        self.manifest.info["checks"] = [list(c) for c in self.checks]
        return self.manifest.write(self.out)


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _non_increasing(values, slack: float = 1e-10) -> bool:
    v = np.asarray(values, dtype=float)
    return bool(np.all(np.diff(v) <= slack * max(1.0, float(np.max(np.abs(v))))))


def _history(run: Run, name: str, rec: IterationRecord) -> None:
    p = run.path(name)
    rec.to_csv(p)
    run.register(p)


def _snapshots(run: Run, name: str, problem: Problem, rec: IterationRecord) -> List[Tuple[int, float, float]]:
    op = problem.op
    ks = sorted(rec.snapshots)
    header = ["param", "exact_flux", "exact_trace"]
    cols = [problem.params, problem.exact_flux, problem.exact_trace]
    for k in ks:
        header += [f"flux_k{k}", f"trace_k{k}"]
        cols += [rec.snapshots[k], op._Ln(rec.snapshots[k])]
    run.write_rows(name, header, zip(*cols))
    return relative_trace_errors(problem, rec)


def _fd_experiment(run: Run, problem: Problem, restart: bool) -> None:
    cfg = run.cfg
    variants = [("plain", iteration_config(cfg), "")]
    if restart and cfg.restart_every is not None:
        variants.append((
            "restart",
            iteration_config(cfg, max_iter=cfg.restart_steps, snapshots=cfg.restart_snapshots,
                             restart_every=cfg.restart_every, stop="max_iter"),
            "_restart",
        ))
    error_rows = []
    for label, icfg, suffix in variants:
        rec = run_with_history(problem, icfg)
        _history(run, f"history{suffix}.csv", rec)
        errs = _snapshots(run, f"snapshots{suffix}.csv", problem, rec)
        error_rows += [(label, k, ef, et) for k, ef, et in errs]
        run.manifest.info[f"{label}_stop"] = [rec.stop_reason, rec.stop_index]
        run.check(f"{label}: residuals non-increasing", _non_increasing(rec.residual_star))
        trace_errs = [et for _, _, et in errs]
        run.check(f"{label}: snapshot errors decrease", len(trace_errs) > 0 and _non_increasing(trace_errs, 0.0),
                  " ".join(f"{e:.4g}" for e in trace_errs))
    run.write_rows("snapshot_errors.csv", ["variant", "k", "flux_rel_err", "trace_rel_err"], error_rows)


def cmd_rectangle(run: Run) -> None:
    n1, n2 = run.cfg.grid_shape()
    problem = rectangle_problem(n1, n2, run.cfg.method)
    run.manifest.info.update(grid=[n1, n2], initial_guess="zero")
    _fd_experiment(run, problem, restart=True)


def cmd_annulus(run: Run) -> None:
    n1, n2 = run.cfg.grid_shape()
    problem = annulus_problem(n1, n2, run.cfg.method)
    run.manifest.info.update(grid=[n1, n2], initial_guess="zero", outer_nodes=len(problem.params))
    _fd_experiment(run, problem, restart=False)


def cmd_annulus_noisy(run: Run) -> None:
    cfg = run.cfg
    n1, n2 = cfg.grid_shape()
    problem = annulus_problem(n1, n2, cfg.method)
    op = problem.op
    noisy, data_eps = perturb_cauchy_data(op.data, NoiseSpec(cfg.noise_level, cfg.seed, cfg.noise_model))
    used = smooth_cauchy_data(SmoothingOperator(cfg.smoothing_r), noisy, data_eps) if cfg.smooth else noisy
    for name, exact, pert, sm in (("noise_f.csv", op.data.f, noisy.f, used.f), ("noise_g.csv", op.data.g, noisy.g, used.g)):
        write_perturbation_csv(run.path(name), exact, pert, sm)
        run.register(run.path(name))
    _, bound, nop = perturbed_affine_term(op, used, data_eps)
    eps = cfg.eps if cfg.eps is not None else bound.star

    full = iteration_config(cfg, stop="max_iter")
    rec_exact = run_with_history(problem, full)
    rec_noisy = run_with_history(Problem(nop, problem.exact_flux, problem.exact_trace), full)
    _history(run, "history_exact.csv", rec_exact)
    _history(run, "history_noisy.csv", rec_noisy)
    _snapshots(run, "snapshots_noisy.csv", Problem(nop, problem.exact_flux, problem.exact_trace), rec_noisy)

    nf = op.l2_norm(problem.exact_flux)
    err_exact = np.asarray(rec_exact.err_l2) / nf
    err_noisy = np.asarray(rec_noisy.err_l2) / nf
    run.write_rows("trajectories.csv", ["k", "err_exact", "err_noisy", "residual_noisy"],
                   zip(rec_noisy.k, err_exact, err_noisy, rec_noisy.residual_star))
    k_stop = discrepancy_index(rec_noisy.residual_star, cfg.mu, eps)
    diffs = np.asarray(rec_noisy.diff_l2[1:])
    hits = np.flatnonzero(diffs <= cfg.tol)
    k_sd = int(hits[0]) + 2 if len(hits) else -1
    i_min = int(np.argmin(err_noisy))
    err_stop = float(err_noisy[k_stop - 1]) if k_stop is not None else float("nan")
    summary = [
        ("data_eps", data_eps), ("z_eps_star", bound.star), ("z_eps_l2", bound.l2), ("eps_used", eps),
        ("mu", cfg.mu), ("k_discrepancy", -1 if k_stop is None else k_stop), ("err_discrepancy", err_stop),
        ("k_successive_diff", k_sd), ("k_min", rec_noisy.k[i_min]), ("err_min", err_noisy[i_min]),
    ]
    run.write_rows("summary.csv", ["key", "value"], summary)
    run.manifest.info.update(grid=[n1, n2], initial_guess="zero", k_discrepancy=k_stop)
    run.check("noisy residuals non-increasing", _non_increasing(rec_noisy.residual_star))
    if cfg.stop == "discrepancy":
        run.check("discrepancy principle stops", k_stop is not None)
        run.check("stop precedes the error minimum", k_stop is not None and k_stop <= rec_noisy.k[i_min],
                  f"k_stop={k_stop}, k_min={rec_noisy.k[i_min]}")


def cmd_oracle_rates(run: Run) -> None:
    cfg = run.cfg
    op = SpectralOperator(cfg.modes)
    ks, slope = stopping_law(op, cfg.eps_grid, cfg.mu, cfg.seed)
    rows = list(zip(cfg.eps_grid, ks)) + [("slope", slope)]
    run.write_rows("stopping_index.csv", ["eps", "k_eps"], rows)
    run.check("stopping-index slope in [-2.3, -1.7]", -2.3 <= slope <= -1.7, f"{slope:.4f}")
    k_grid = log_grid(cfg.k_min, cfg.k_max, cfg.n_k)
    for p in cfg.p_values:
        table = run_rate_experiment(op, p, np.ones(op.N), cfg.eps_grid, cfg.mu, cfg.seed, k_grid, normalize=True)
        name = f"rates_p{p:g}.csv"
        table.to_csv(run.path(name))
        run.register(run.path(name))
        var = variation(table.envelope())
        ratio = table.error_ratio()
        run.check(f"p={p:g}: envelope variation <= 30%", var <= 0.3, f"{var:.3f}")
        run.check(f"p={p:g}: error ratio stable within 2x", ratio.max() <= 2 * ratio.min(),
                  f"{ratio.max() / ratio.min():.3f}")


def cmd_semi_convergence(run: Run) -> None:
    cfg = run.cfg
    op = SpectralOperator(cfg.modes)
    sc = semi_convergence(op, cfg.p_values[0], cfg.noise_level, cfg.mu, cfg.seed, cfg.curve_k_max, cfg.n_curve)
    p = run.path("error_curve.csv")
    sc.to_csv(p)
    run.register(p)
    run.write_rows("summary.csv", ["key", "value"], [
        ("eps", sc.eps), ("k_stop", sc.k_stop), ("err_stop", sc.err_stop),
        ("k_min", sc.k_min), ("err_min", sc.err_min), ("interior_minimum", sc.interior),
    ])
    run.check("interior minimum", sc.interior)
    run.check("stopped error within 2x of minimum", sc.err_stop <= 2 * sc.err_min,
              f"{sc.err_stop:.4g} vs {sc.err_min:.4g}")


COMMANDS: Dict[str, Callable[[Run], None]] = {
    "rectangle": cmd_rectangle,
    "annulus": cmd_annulus,
    "annulus_noisy": cmd_annulus_noisy,
    "oracle_rates": cmd_oracle_rates,
    "semi_convergence": cmd_semi_convergence,
}

PLOT_SCRIPT = '''"""Plot the CSV files of this run directory (needs matplotlib)."""
import csv
import glob
import os

import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))


def read(name):
    with open(os.path.join(here, name)) as fh:
        rows = [r for r in csv.reader(fh)]
    header, body = rows[0], [r for r in rows[1:] if r and r[0] and r[0][0] in "-0123456789.n"]
    return header, [[float(v) for v in r] for r in body if len(r) == len(header)]


for path in sorted(glob.glob(os.path.join(here, "*.csv"))):
    name = os.path.basename(path)
    try:
        header, rows = read(name)
    except ValueError:
        continue
    if not rows:
        continue
    cols = list(zip(*rows))
    fig, ax = plt.subplots()
    for i in range(1, len(header)):
        ax.plot(cols[0], cols[i], label=header[i])
    if name.startswith(("history", "trajector", "error_curve", "rates")):
        ax.set_yscale("log")
    if name.startswith(("error_curve", "rates", "stopping")):
        ax.set_xscale("log")
    ax.set_xlabel(header[0])
    ax.legend(fontsize="small")
    ax.set_title(name)
    fig.savefig(os.path.join(here, name[:-4] + ".png"), dpi=120)
    plt.close(fig)
'''


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cauchy-mann", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", required=True, help="flat 'key = value' config file")
        p.add_argument("--check", action="store_true", help="exit with status 4 if a built-in check fails")
        p.add_argument("--out", help="output directory (overrides out_dir)")
        p.add_argument("--seed", type=int, help="random seed (overrides seed)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, experiment=args.command, seed=args.seed, out_dir=args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    run = Run(cfg, cfg.out_dir)
    try:
        COMMANDS[args.command](run)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CauchyMannError, RuntimeError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER

    plot = run.path("plot.py")
    with open(plot, "w") as fh:
        fh.write(PLOT_SCRIPT)
    run.register(plot)
    run.finish()

    failed = [c for c in run.checks if not c[1]]
    for name, ok, detail in run.checks:
        print(f"{'PASS' if ok else 'FAIL'}  {name}" + (f"  ({detail})" if detail else ""))
    print(f"wrote {len(run.manifest.files)} files to {run.out}")
    if args.check and failed:
        return EXIT_CHECK
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
