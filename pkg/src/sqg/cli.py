"""Command-line entry point: ``sqg simulate | verify | picard | checkpoint | manifest``.

Exit codes: 0 success, 1 operational error (bad config, unreadable file,
violated precondition), 2 scientific negative outcome (blowup flag, no
Picard contraction, violated lemma bound).
"""

from __future__ import annotations

import argparse
import math
import sys
import time
from pathlib import Path

from .checkpoint import decode, diff_checkpoints, encode, git_blob_hash, write_checkpoint
from .config import RunConfig, VerifyConfig, load_run_config, load_verify_config
from .diagnostics import CriterionParams, blowup_proxy_fit, lambda_functional, regularity_monitor
from .errors import InsufficientDataError, SQGError
from .lemmas import (
    LemmaReport,
    _check_commutator_params,
    _check_product_params,
    scaling_invariance_check,
    verify_bernstein,
    verify_commutator_estimate,
    verify_generalized_bernstein,
    verify_partition,
    verify_product_estimate,
)
from .littlewood_paley import DyadicDecomposition
from .outputs import file_entries, verify_manifest, write_csv, write_json, write_json_atomic
from .solver import (
    SolverConfig,
    existence_time_estimate,
    make_initial_data,
    picard_contracts,
    picard_iterate,
    run_simulation,
)
from .spectral import GridSpec, lp_norm, riesz_velocity

EXIT_OK, EXIT_ERROR, EXIT_NEGATIVE = 0, 1, 2
SUITES = ("bernstein", "gen_bernstein", "commutator", "product", "partition", "scaling")
_INITIAL_KEYS = {"amplitude", "j1", "j2", "mode", "separation", "width"}


# -- builders -------------------------------------------------------------------

def build_grid(section):
    return GridSpec(section.n, section.length, section.dealias_fraction)


def build_solver_config(cfg: RunConfig, **overrides):
    s = cfg.solver
    kw = dict(grid=build_grid(cfg.grid), gamma=s.gamma, dt=s.dt, t_end=s.t_end, scheme=s.scheme,
              snapshot_stride=s.snapshot_stride, linear_only=s.linear_only, cfl_number=s.cfl_number,
              pileup_threshold=s.pileup_threshold)
    kw.update(overrides)
    return SolverConfig(**kw)


def build_initial_data(cfg: RunConfig, grid):
    params = dict(cfg.initial_data.params)
    unknown = set(params) - _INITIAL_KEYS
    if unknown:
        raise SQGError(f"initial_data.params: unknown keys {sorted(unknown)}; valid: {sorted(_INITIAL_KEYS)}")
    if "mode" in params:
        params["mode"] = tuple(params["mode"])
    return make_initial_data(cfg.initial_data.kind, grid, seed=cfg.initial_data.seed, **params)


def criterion_params(cfg: RunConfig):
    c = cfg.criterion
    return CriterionParams(p=c.p, r0=c.r0, gamma=cfg.solver.gamma, q=c.q)


# -- simulate -------------------------------------------------------------------

def simulate(cfg: RunConfig, out_dir=None):
    """Run one simulation and write all artifacts.  Returns the manifest dict."""
    started = time.time()
    out = Path(out_dir) if out_dir is not None else cfg.output_dir()
    ckpt_dir = out / "checkpoints"
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    scfg = build_solver_config(cfg)
    theta0 = build_initial_data(cfg, scfg.grid)
    gamma = scfg.gamma
    stride = cfg.outputs.checkpoint_stride
    written = []

    def checkpoint(step, t, field):
        if step % stride == 0:
            path = ckpt_dir / f"step_{step:08d}.sqgf"
            write_checkpoint(path, field, gamma, t)
            written.append(path)

    traj = run_simulation(theta0, scfg, diagnostics=True, callback=checkpoint)
    final = out / "final.sqgf"
    write_checkpoint(final, traj.fields[-1], gamma, traj.times[-1])
    written.append(final)

    flags = cfg.outputs.csv_flags
    params = criterion_params(cfg)
    warnings = list(traj.warnings)
    monitor = None
    if flags.get("diagnostics", True):
        names = sorted(traj.diagnostics)
        rows = zip(traj.diag_times, *(traj.diagnostics[k] for k in names))
        written.append(write_csv(out / "diagnostics.csv", ["time", *names], rows))
    try:
        monitor = regularity_monitor(traj, params)
    except InsufficientDataError as exc:
        warnings.append(f"regularity monitor skipped: {exc}")
    if monitor is not None and flags.get("monitor", True):
        rows = ((r["time"], r["besov_alpha"], r["running_integral"]) for r in monitor.to_rows())
        written.append(write_csv(out / "monitor.csv", ["time", "besov_alpha", "running_integral"], rows))
    if flags.get("norms", True):
        ps = sorted({2.0, params.p, math.inf})
        rows = [(t, "lp_inf" if math.isinf(p) else f"lp_{p:g}", lp_norm(f, p, oversample=1 if p == 2 else 2))
                for t, f in zip(traj.times, traj.fields) for p in ps]
        written.append(write_csv(out / "norms.csv", ["time", "norm_id", "value"], rows))
    if monitor is not None and cfg.outputs.blowup_t_guess is not None:
        try:
            fit = blowup_proxy_fit(monitor, params, cfg.outputs.blowup_t_guess)
        except (InsufficientDataError, SQGError) as exc:
            fit = {"error": str(exc)}
        written.append(write_json(out / "blowup_fit.json", fit))

    manifest = {
        "config": cfg.model_dump(mode="json"),
        "initial_data_hash": git_blob_hash(encode(theta0, gamma, 0.0)),
        "status": traj.status,
        "last_reliable_time": traj.last_reliable_time,
        "monitor_verdict": monitor.verdict if monitor is not None else None,
        "warnings": warnings,
        "started": started,
        "finished": time.time(),
        "wall_clock_seconds": time.time() - started,
        "files": file_entries(out, written),
    }
    write_json_atomic(out / "manifest.json", manifest)
    return manifest


def cmd_simulate(args):
    cfg = load_run_config(args.config)
    manifest = simulate(cfg)
    print(f"status: {manifest['status']}")
    for w in manifest["warnings"]:
        print(f"warning: {w}", file=sys.stderr)
    return EXIT_OK if manifest["status"] == "completed" else EXIT_NEGATIVE


# -- verify ---------------------------------------------------------------------

def _opt(section, key, default):
    v = section.get(key, default)
    if isinstance(v, str) and v.lower() in ("inf", "infinity"):
        return math.inf
    return v


def _band_trajectory(grid, section, seed):
    """Short solver run on random band data: the scalar and its velocity."""
    theta0 = make_initial_data("random_band", grid, amplitude=_opt(section, "amplitude", 1.0), seed=seed,
                               j1=_opt(section, "j1", 0), j2=_opt(section, "j2", 1))
    scfg = SolverConfig(grid, gamma=_opt(section, "gamma", 1.0), dt=_opt(section, "dt", 1e-2),
                        t_end=_opt(section, "t_end", 0.2), snapshot_stride=_opt(section, "stride", 5))
    traj = run_simulation(theta0, scfg, diagnostics=False)
    return traj.map(riesz_velocity), traj


def _scaling_report(decomp, section, seed):
    grid = decomp.grid
    m = int(_opt(section, "m", 1))
    gamma = float(_opt(section, "gamma", 1.0))
    tol = float(_opt(section, "tol", 1e-10))
    j1, j2 = int(_opt(section, "j1", 0)), int(_opt(section, "j2", 1))
    ps = [float(p) if not isinstance(p, str) else math.inf for p in _opt(section, "p", [2.0, 4.0])]
    field = make_initial_data("random_band", grid, seed=seed, j1=j1, j2=j2)
    report = LemmaReport("scaling", {"m": m, "gamma": gamma, "tol": tol, "p": ps, "j1": j1, "j2": j2,
                                     "n": grid.n, "length": grid.length}, mollifier=decomp.mollifier.describe())
    worst = 0.0
    for p in ps:
        for j in range(j1, j2 + 1):
            before, after = scaling_invariance_check(field, j, m, gamma, p, decomp)
            dev = abs(after - before) / before if before > 0 else abs(after)
            worst = max(worst, dev)
            report.per_j.append({"j": j, "p": p, "lhs": after, "rhs": before, "ratio": after / before if before else 0.0})
    report.constants = {"max_relative_deviation": worst}
    report.verdict = "passed" if worst < tol else "violated"
    return report


def run_suite(suite, vcfg: VerifyConfig):
    if suite not in SUITES:
        raise SQGError(f"unknown suite {suite!r}; valid suites: {', '.join(SUITES)}")
    grid = build_grid(vcfg.grid)
    decomp = DyadicDecomposition(grid)
    section = dict(getattr(vcfg, suite))
    samples = int(section.pop("samples", vcfg.samples))
    seed = int(section.pop("seed", vcfg.seed))
    js = section.get("js")
    if suite == "bernstein":
        return verify_bernstein(decomp, p=float(_opt(section, "p", 2.0)), q_out=float(_opt(section, "q_out", math.inf)),
                                s=float(_opt(section, "s", 1.0)), samples=samples, seed=seed, js=js,
                                oversample=int(_opt(section, "oversample", 2)))
    if suite == "gen_bernstein":
        return verify_generalized_bernstein(decomp, p=float(_opt(section, "p", 4.0)),
                                            gamma=float(_opt(section, "gamma", 1.0)), samples=samples, seed=seed,
                                            js=js, oversample=int(_opt(section, "oversample", 2)))
    if suite == "partition":
        return verify_partition(decomp, tol=float(_opt(section, "tol", 1e-12)))
    if suite == "scaling":
        return _scaling_report(decomp, section, seed)
    if suite == "commutator":
        params = {k: float(_opt(section, k, d)) for k, d in
                  (("rho1", 0.5), ("rho2", 0.5), ("r1", 4.0), ("r2", 4.0), ("p", 2.0), ("q", 2.0))}
        _check_commutator_params(params["rho1"], params["rho2"], params["r1"], params["r2"], params["p"])
        traj_u, traj_v = _band_trajectory(grid, section, seed)
        return verify_commutator_estimate(params, traj_u, traj_v, decomp, js=js)
    params = {k: float(_opt(section, k, d)) for k, d in
              (("s", -0.5), ("s1", 0.5), ("p", 2.0), ("q", 2.0), ("r1", 4.0), ("r2", 4.0))}
    _check_product_params(params["s"], params["s1"], params["p"], params["q"], params["r1"], params["r2"])
    pairs_u, pairs_v = [], []
    for i in range(max(1, min(samples, 8))):
        u, v = _band_trajectory(grid, section, seed + i)
        pairs_u.append(u)
        pairs_v.append(v)
    return verify_product_estimate(params, pairs_u, pairs_v, decomp)


def cmd_verify(args):
    if args.suite not in SUITES:
        print(f"error: unknown suite {args.suite!r}; valid suites: {', '.join(SUITES)}", file=sys.stderr)
        return EXIT_ERROR
    vcfg = load_verify_config(args.config) if args.config else VerifyConfig()
    report = run_suite(args.suite, vcfg)
    out = vcfg.output_dir()
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{args.suite}_report.json"
    path.write_text(report.to_json(indent=2) + "\n", encoding="utf-8")
    print(f"{args.suite}: {report.verdict}  {report.constants}")
    return EXIT_OK if report.passed else EXIT_NEGATIVE


# -- picard ---------------------------------------------------------------------

def picard(cfg: RunConfig, k_max=None, out_dir=None):
    """Run the successive approximations and write ``picard.csv`` and ``picard_verdict.json``."""
    out = Path(out_dir) if out_dir is not None else cfg.output_dir()
    out.mkdir(parents=True, exist_ok=True)
    base = build_solver_config(cfg)
    theta0 = build_initial_data(cfg, base.grid)
    params = criterion_params(cfg)
    pc = cfg.picard
    k_max = k_max or pc.k_max
    if pc.t_end is not None:
        T = pc.t_end
    elif pc.c_cal is not None:
        T = existence_time_estimate(theta0, params.p, params.q, params.r0, params.gamma, pc.c_cal)
    else:
        T = base.t_end
    if not math.isfinite(T):
        T = base.t_end
    steps = pc.steps or max(4, int(math.ceil(T / base.dt - 1e-9)))
    scfg = build_solver_config(cfg, t_end=T, dt=T / steps, snapshot_stride=1)
    decomp = DyadicDecomposition(scfg.grid)
    run = picard_iterate(theta0, scfg, k_max, params, decomp)
    # row k holds Λ(theta^{k+1} - theta^k, T) and its ratio to row k-1
    rows = []
    for i, s in enumerate(run.states[1:]):
        ratio = run.ratios[i - 1] if i >= 1 and i - 1 < len(run.ratios) else ""
        rows.append((s.k - 1, s.difference_norm, ratio))
    write_csv(out / "picard.csv", ["k", "difference_norm", "ratio"], rows)
    contracts = picard_contracts(run)
    verdict = {"status": run.status, "contracts": contracts, "median_ratio": run.median_ratio,
               "T": T, "dt": scfg.dt_effective, "steps": scfg.n_steps, "k_max": k_max,
               "c_cal": pc.c_cal, "iterations": len(run.states) - 1}
    if run.status != "no_contraction":
        direct = run_simulation(theta0, scfg, diagnostics=False)
        if direct.status == "completed":
            verdict["direct_difference"] = lambda_functional(run.final.trajectory - direct, params, decomp)
    write_json(out / "picard_verdict.json", verdict)
    return verdict


def cmd_picard(args):
    cfg = load_run_config(args.config)
    verdict = picard(cfg, args.k_max)
    print(f"picard: {verdict['status']}, median ratio {verdict['median_ratio']:.3g}")
    return EXIT_OK if verdict["contracts"] else EXIT_NEGATIVE


# -- checkpoint / manifest ------------------------------------------------------

def cmd_checkpoint(args):
    if args.action == "info":
        if len(args.paths) != 1:
            raise SQGError("checkpoint info takes exactly one file")
        header, _ = decode(Path(args.paths[0]).read_bytes())
        print(f"version: {header.version}")
        print(f"n: {header.n}")
        print(f"length: {header.length!r}")
        print(f"gamma: {header.gamma!r}")
        print(f"time: {header.time!r}")
        return EXIT_OK
    if len(args.paths) != 2:
        raise SQGError("checkpoint diff takes exactly two files")
    print(repr(diff_checkpoints(*args.paths)))
    return EXIT_OK


def cmd_manifest(args):
    problems = verify_manifest(args.path)
    for p in problems:
        print(p, file=sys.stderr)
    print("ok" if not problems else f"{len(problems)} problem(s)")
    return EXIT_OK if not problems else EXIT_ERROR


# -- entry point ----------------------------------------------------------------

def build_parser():
    ap = argparse.ArgumentParser(prog="sqg", description="Dissipative SQG solver and estimate checks.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a simulation from a config file")
    p.add_argument("-c", "--config", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help=f"run a verification suite ({', '.join(SUITES)})")
    p.add_argument("suite")
    p.add_argument("-c", "--config")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("picard", help="successive approximations with contraction verdict")
    p.add_argument("-c", "--config", required=True)
    p.add_argument("--k-max", type=int, default=None)
    p.set_defaults(func=cmd_picard)

    p = sub.add_parser("checkpoint", help="inspect or compare checkpoint files")
    p.add_argument("action", choices=("info", "diff"))
    p.add_argument("paths", nargs="+")
    p.set_defaults(func=cmd_checkpoint)

    p = sub.add_parser("manifest", help="re-hash the files listed in a run manifest")
    p.add_argument("action", choices=("verify",))
    p.add_argument("path")
    p.set_defaults(func=cmd_manifest)
    return ap


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_ERROR
    try:
        return args.func(args)
    except (SQGError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
