"""``gp-mass`` command-line front end.

Exit codes: 0 success, 1 other failure (including failed acceptance
criteria), 2 configuration error, 3 solver did not converge, 4 degenerate
scattering regime.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import platform
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .errors import ConfigError, DegenerateRegime, GPMassError, MismatchedGrid, NoConvergence
from .grid import Grid, write_field

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

log = logging.getLogger("gp_mass")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NOCONV, EXIT_DEGENERATE = 0, 1, 2, 3, 4


# -- configuration ---------------------------------------------------------

def load_config(path) -> dict:
    """Read a TOML config, falling back to JSON."""
    if path is None:
        return {}
    text = Path(path).read_text()
    if str(path).endswith(".json"):
        return json.loads(text)
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        try:
            return json.loads(text)
        except json.JSONDecodeError:
            raise ConfigError(f"{path}: not valid TOML ({exc}) or JSON") from None


def _potential(spec, name):
    from .model import PotentialSpec

    if spec is None:
        return PotentialSpec()
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError(f"model.{name} must be a table with a 'kind' key")
    return PotentialSpec(spec["kind"], dict(spec.get("coeffs", {})))


def build_grid(cfg: dict, n_override=None) -> Grid:
    mb = cfg.get("model", {})
    try:
        return Grid(int(mb.get("dim", 1)), float(mb.get("L", 10.0)),
                    int(n_override or mb.get("n", 1024)))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad grid in [model]: {exc}") from None


def build_model(cfg: dict, n_override=None):
    from .model import ModelParams, ScatteringParams

    mb = cfg.get("model")
    if mb is None:
        raise ConfigError("config has no [model] block")
    missing = [k for k in ("mu1", "mu2", "beta") if k not in mb]
    if missing:
        raise ConfigError(f"[model] must set {', '.join(missing)} explicitly")
    grid = build_grid(cfg, n_override)
    s = ScatteringParams(float(mb["mu1"]), float(mb["mu2"]), float(mb["beta"]))
    return ModelParams.build(grid, _potential(mb.get("potential1"), "potential1"),
                             _potential(mb.get("potential2"), "potential2"), s,
                             float(mb.get("confinement_floor", 0.0)))


def thread_cap(requested=None) -> int:
    env = os.environ.get("GP_MASS_THREADS")
    cap = os.cpu_count() or 1
    if env:
        try:
            cap = max(int(env), 1)
        except ValueError:
            raise ConfigError(f"GP_MASS_THREADS={env!r} is not an integer") from None
    return min(requested, cap) if requested else cap


def solver_options(args, cfg):
    from .maximizer import MaximizeOptions

    sb = cfg.get("solver", {})

    def pick(name, default):
        v = getattr(args, name, None)
        return v if v is not None else sb.get(name, default)

    return MaximizeOptions(
        gtol=float(pick("gtol", 1e-8)), ctol=float(pick("ctol", 1e-10)),
        rtol=float(pick("rtol", 1e-6)), max_iter=int(sb.get("max_iter", 20000)),
        seed=args.seed, starts=int(getattr(args, "starts", None) or sb.get("starts", 1)),
        threads=thread_cap(getattr(args, "threads", None)),
    )


def _section(cfg, name, key, flag, default=None, required=False):
    """Flag value, else [name].key from the config, else default."""
    if flag is not None:
        return flag
    if key in cfg.get(name, {}):
        return cfg[name][key]
    if required:
        raise ConfigError(f"--{key.replace('_', '-')} (or [{name}].{key}) is required")
    return default


def parse_floats(text) -> list:
    """'1e-4,1e-3' or 'logspace:-4:-2:8' or 'linspace:a:b:n' into a float list."""
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    text = str(text)
    try:
        if text.startswith(("logspace:", "linspace:")):
            kind, a, b, n = text.split(":")
            fn = np.logspace if kind == "logspace" else np.linspace
            return [float(v) for v in fn(float(a), float(b), int(n))]
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse number list {text!r}") from None


# -- output ----------------------------------------------------------------

class Run:
    """Collects emitted files and writes the manifest last."""

    def __init__(self, out: Path, command: str, argv, cfg: dict, seed):
        self.out = out
        self.command = command
        self.argv = list(argv)
        self.cfg = cfg
        self.seed = seed
        self.files: list[Path] = []
        self.t0 = time.time()
        out.mkdir(parents=True, exist_ok=True)

    def path(self, name) -> Path:
        p = self.out / name
        self.files.append(p)
        return p

    def json(self, name, obj):
        with open(self.path(name), "w") as fh:
            json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def csv(self, name, columns, rows, meta: dict):
        with open(self.path(name), "w", newline="") as fh:
            fh.write("# " + json.dumps(_jsonable(meta), sort_keys=True) + "\n")
            w = csv.writer(fh)
            w.writerow(columns)
            for r in rows:
                w.writerow([_cell(r[c]) for c in columns])

    def field(self, name, grid, f):
        write_field(self.path(name), grid, f)

    def gnuplot(self, name, csv_name, x, ys, logscale=False):
        lines = [
            "set datafile separator ','",
            "set key autotitle columnhead",
            f"set xlabel '{x}'",
        ]
        if logscale:
            lines.append("set logscale xy")
        plots = ", ".join(f"'{csv_name}' using '{x}':'{y}' with linespoints" for y in ys)
        lines.append(f"plot {plots}")
        self.path(name).write_text("\n".join(lines) + "\n")

    def manifest(self):
        entries = []
        for p in self.files:
            entries.append({"path": p.name, "bytes": p.stat().st_size,
                            "sha256": hashlib.sha256(p.read_bytes()).hexdigest()})
        doc = {
            "command": self.command,
            "argv": self.argv,
            "config": self.cfg,
            "seed": self.seed,
            "versions": {"gp_mass": __version__, "numpy": np.__version__,
                         "scipy": scipy.__version__, "python": platform.python_version()},
            "timing": {"started": self.t0, "seconds": time.time() - self.t0},
            "files": entries,
        }
        with open(self.out / "manifest.json", "w") as fh:
            json.dump(_jsonable(doc), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


# -- subcommands -----------------------------------------------------------

def cmd_eig(args, cfg, run: Run):
    from .eigen import principal_eigenpair

    grid = build_grid(cfg, args.n)
    mb = cfg.get("model", {})
    rec = {"tolerance": args.eig_tol}
    for i, key in ((1, "potential1"), (2, "potential2")):
        V = _potential(mb.get(key), key).evaluate(grid)
        ep = principal_eigenpair(grid, V, args.eig_tol)
        rec[f"lambda{i}"] = ep.lam
        rec[f"residual{i}"] = ep.residual
        rec[f"iterations{i}"] = ep.iterations
        run.field(f"phi{i}.gpf", grid, ep.phi)
    rec["lambda"] = rec["lambda1"]
    run.json("eig.json", rec)
    print(f"lambda1 = {rec['lambda1']:.10f}")
    print(f"lambda2 = {rec['lambda2']:.10f}")


def _constraint(args, cfg):
    from .model import ConstraintSpec

    alpha = _section(cfg, "maximize", "alpha", args.alpha, required=True)
    rho1 = _section(cfg, "maximize", "rho1", args.rho1, required=True)
    rho2 = _section(cfg, "maximize", "rho2", args.rho2, required=True)
    return ConstraintSpec(float(alpha), float(rho1), float(rho2))


def _solve(m, c, opts):
    from .maximizer import maximize, multi_start

    if opts.starts > 1:
        best, _ = multi_start(m, c, opts)
        return best
    return maximize(m, c, None, opts)


def cmd_maximize(args, cfg, run: Run):
    from .model import classify

    m = build_model(cfg, args.n)
    opts = solver_options(args, cfg)
    s = _solve(m, c := _constraint(args, cfg), opts)
    rec = s.record()
    rec["tolerances"] = opts.metadata()
    rec["regime"] = classify(m.scattering).label
    rec["constraint"] = {"alpha": c.alpha, "rho1": c.rho1, "rho2": c.rho2}
    if "max_spread" in s.diagnostics:
        rec["multistart"] = {"distinct": s.diagnostics["distinct"],
                             "max_spread": s.diagnostics["max_spread"]}
    run.json("solution.json", rec)
    run.field("u1.gpf", m.grid, s.pair[0])
    run.field("u2.gpf", m.grid, s.pair[1])
    print(json.dumps(_jsonable(rec), sort_keys=True))


def cmd_sweep(args, cfg, run: Run):
    from .continuation import e_curve, stability_verdict, sweep
    from .eigen import feasibility_threshold

    m = build_model(cfg, args.n)
    opts = solver_options(args, cfg)
    rho1 = float(_section(cfg, "sweep", "rho1", args.rho1, required=True))
    rho2 = float(_section(cfg, "sweep", "rho2", args.rho2, required=True))
    T = feasibility_threshold(m, rho1, rho2)
    alphas = _section(cfg, "sweep", "alphas", args.alphas)
    if alphas is not None:
        grid = parse_floats(alphas)
    else:
        lo = float(_section(cfg, "sweep", "alpha_min", args.alpha_min, T + 0.05))
        hi = float(_section(cfg, "sweep", "alpha_max", args.alpha_max, T + 2.0))
        pts = int(_section(cfg, "sweep", "points", args.points, 20))
        grid = list(np.linspace(lo, hi, pts))
    mode = _section(cfg, "sweep", "mode", args.mode, "warm")
    fd = float(_section(cfg, "sweep", "fd_step", args.fd_step, 1e-3))
    b = sweep(m, rho1, rho2, grid, opts, mode=mode, fd_step=fd if fd > 0 else None)
    verdict = stability_verdict(b)
    a_star = _section(cfg, "sweep", "alpha_star", args.alpha_star)
    a_star = float(a_star) if a_star is not None else float(b.alphas[len(b.points) // 2])
    e, de, g_star = e_curve(b, a_star)
    gp = verdict.gamma_prime
    rows = [{
        "alpha": p.alpha, "M": p.m_value, "omega1": p.omega1, "omega2": p.omega2,
        "gamma": p.gamma, "gamma_prime": gp[k], "e": e[k], "e_prime": de[k],
        "residual": p.residual, "verdict": verdict.flags[k],
    } for k, p in enumerate(b.points)]
    cols = ["alpha", "M", "omega1", "omega2", "gamma", "gamma_prime", "e", "e_prime",
            "residual", "verdict"]
    meta = {"tolerances": opts.metadata(), "fd_step": fd, "margin": verdict.margin,
            "alpha_star": a_star, "gamma_star": g_star, "seed": args.seed}
    run.csv("sweep.csv", cols, rows, meta)
    run.json("sweep.json", {**meta, "rho1": rho1, "rho2": rho2, "threshold": T,
                            "monotone_window": verdict.monotone_window,
                            "discontinuities": b.discontinuities,
                            "omega_trend": b.omega_trend()})
    if args.plot:
        run.gnuplot("sweep.gp", "sweep.csv", "alpha", ["gamma", "M"])
    print(f"{sum(f == 'stable' for f in verdict.flags)}/{len(rows)} points stable; "
          f"monotone window {verdict.monotone_window}")


def cmd_bifurcate(args, cfg, run: Run):
    from .bifurcation import kernel_element, kernel_residual, small_mass_scaling

    m = build_model(cfg, args.n)
    opts = solver_options(args, cfg)
    theta = float(_section(cfg, "bifurcate", "theta", args.theta, np.pi / 4))
    eps = parse_floats(_section(cfg, "bifurcate", "eps_grid", args.eps_grid, "logspace:-4:-2:8"))
    K = kernel_element(m, theta)
    kr = kernel_residual(m, K)
    r = small_mass_scaling(m, theta, eps, opts)
    meta = {"tolerances": opts.metadata(), "theta": theta, "seed": args.seed}
    run.csv("bifurcate.csv", ["eps", "alpha", "gamma", "ratio_gamma_sqrt_eps", "l2_dist_to_anchor"],
            list(r.rows()), meta)
    run.json("kernel.json", {
        **meta, "o1": K.o1, "o2": K.o2, "nondeg_value": K.nondeg_value,
        "a_theta_predicted": K.a_theta, "field_residual": kr["field_residual"],
        "mass_rows": kr["mass_rows"], "energy_row": kr["energy_row"],
        "slope": r.slope, "intercept": r.intercept, "ratio_smallest_eps": r.ratio,
    })
    run.field("psi1.gpf", m.grid, K.psi1)
    run.field("psi2.gpf", m.grid, K.psi2)
    if args.plot:
        run.gnuplot("bifurcate.gp", "bifurcate.csv", "eps", ["gamma"], logscale=True)
    print(f"slope = {r.slope:.4f}, gamma/sqrt(eps) = {r.ratio:.4f} "
          f"(predicted {r.predicted_ratio:.4f}), nondeg = {K.nondeg_value:.4g}")


def _evolve_setup(args, cfg):
    m = build_model(cfg, args.n)
    opts = solver_options(args, cfg)
    s = _solve(m, _constraint(args, cfg), opts)
    dt = float(_section(cfg, "evolve", "dt", args.dt, 1e-3))
    horizon = float(_section(cfg, "evolve", "horizon", args.horizon, 20.0))
    sample = float(_section(cfg, "evolve", "sample_dt", args.sample_dt, 0.1))
    return m, opts, s, dt, horizon, sample


def cmd_evolve(args, cfg, run: Run):
    from .evolve import evolve, perturbed_data

    m, opts, s, dt, horizon, sample = _evolve_setup(args, cfg)
    delta = float(_section(cfg, "evolve", "delta", args.delta, 0.0))
    kind = _section(cfg, "evolve", "kind", args.kind, "bump")
    pseed = int(_section(cfg, "evolve", "perturb_seed", args.perturb_seed, 0))
    snaps = parse_floats(_section(cfg, "evolve", "snapshots", args.snapshots, []) or [])
    psi0 = perturbed_data(m, s, delta, kind, pseed)
    _, series, fields = evolve(m, psi0, s.gamma, dt, horizon, sample,
                               reference=s.pair, snapshots=snaps)
    meta = {"tolerances": opts.metadata(), "dt": dt, "gamma_star": s.gamma,
            "delta": delta, "kind": kind, "perturb_seed": pseed, "seed": args.seed}
    run.csv("evolve.csv", ["t", "mass1", "mass2", "energy", "orbital_distance"],
            list(series.rows()), meta)
    for t, pair in sorted(fields.items()):
        run.field(f"psi1_t{t:g}.gpf", m.grid, pair[0])
        run.field(f"psi2_t{t:g}.gpf", m.grid, pair[1])
    if args.plot:
        run.gnuplot("evolve.gp", "evolve.csv", "t", ["orbital_distance"])
    print(f"max mass drift {series.max_mass_drift():.3e}, "
          f"max energy drift {series.max_energy_drift():.3e}, "
          f"sup distance {max(series.orbital_distance):.3e}")


def cmd_stability(args, cfg, run: Run):
    from .evolve import branch_tangent, stability_experiment

    m, opts, s, dt, horizon, sample = _evolve_setup(args, cfg)
    deltas = parse_floats(_section(cfg, "stability", "deltas", args.deltas, "1e-3,5e-4"))
    kinds = _section(cfg, "stability", "kinds", args.kinds, "bump,rotation,tangent")
    kinds = kinds.split(",") if isinstance(kinds, str) else list(kinds)
    seeds = [int(v) for v in parse_floats(_section(cfg, "stability", "seeds", args.pseeds, "0,1,2"))]
    tangent = branch_tangent(m, s, opts=opts) if "tangent" in kinds else None
    jobs = [(k, sd, d) for k in kinds for sd in seeds for d in deltas]

    def one(job):
        k, sd, d = job
        return stability_experiment(s, m, d, horizon, dt, k, sd, sample, tangent=tangent)

    if opts.threads > 1:
        with ThreadPoolExecutor(opts.threads) as pool:
            reports = list(pool.map(one, jobs))
    else:
        reports = [one(j) for j in jobs]
    rows = [{"kind": r.kind, "seed": r.seed, "delta": r.delta, "sup_distance": r.sup_distance,
             "max_mass_drift": r.max_mass_drift, "max_energy_drift": r.max_energy_drift}
            for r in reports]
    meta = {"tolerances": opts.metadata(), "dt": dt, "horizon": horizon,
            "gamma_star": s.gamma, "seed": args.seed}
    run.csv("stability.csv", ["kind", "seed", "delta", "sup_distance", "max_mass_drift",
                              "max_energy_drift"], rows, meta)
    run.json("stability.json", {**meta, "times": reports[0].times if reports else [],
                                "runs": [{**row, "distance_series": r.distance_series}
                                         for row, r in zip(rows, reports)]})
    worst = max((r.sup_distance for r in reports), default=float("nan"))
    print(f"{len(reports)} trajectories, largest sup distance {worst:.3e}")


def cmd_acceptance(args, cfg, run: Run):
    from .acceptance import AcceptanceConfig, format_row, run_suite

    acfg = AcceptanceConfig(threads=thread_cap(args.threads))
    if args.half:
        acfg.n, acfg.n2d = acfg.n // 2, acfg.n2d // 2
    only = args.only.split(",") if args.only else None
    results = run_suite(acfg, only, args.degenerate,
                        report=lambda r: print(format_row(r), flush=True))
    n_pass = sum(r.passed for r in results)
    print(f"{n_pass}/{len(results)} criteria passed")
    run.json("acceptance.json", [{"id": r.cid, "title": r.title, "passed": r.passed,
                                  "expected_fail": r.expected_fail, "detail": r.detail}
                                 for r in results])
    return EXIT_OK if n_pass == len(results) else EXIT_FAIL


COMMANDS = {
    "eig": cmd_eig, "maximize": cmd_maximize, "sweep": cmd_sweep,
    "bifurcate": cmd_bifurcate, "evolve": cmd_evolve, "stability": cmd_stability,
    "acceptance": cmd_acceptance,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML (or JSON) run configuration")
    common.add_argument("--out", default="gp_mass_out", help="output directory")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--n", type=int, help="override model.n")
    common.add_argument("--threads", type=int, help="worker threads (capped by GP_MASS_THREADS)")
    common.add_argument("--gtol", type=float)
    common.add_argument("--ctol", type=float)
    common.add_argument("--rtol", type=float)
    common.add_argument("--plot", action="store_true", help="also write a gnuplot script")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="gp-mass", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"gp-mass {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("eig", parents=[common], help="principal eigenpairs of -Lap + V_i")
    e.add_argument("--eig-tol", type=float, default=1e-10)

    def constraint_flags(sp):
        sp.add_argument("--alpha", type=float)
        sp.add_argument("--rho1", type=float)
        sp.add_argument("--rho2", type=float)
        sp.add_argument("--starts", type=int)

    mx = sub.add_parser("maximize", parents=[common], help="solve M(alpha, rho1, rho2)")
    constraint_flags(mx)

    sw = sub.add_parser("sweep", parents=[common], help="trace the branch in alpha")
    sw.add_argument("--rho1", type=float)
    sw.add_argument("--rho2", type=float)
    sw.add_argument("--alpha-min", type=float)
    sw.add_argument("--alpha-max", type=float)
    sw.add_argument("--points", type=int)
    sw.add_argument("--alphas", help="explicit comma-separated alpha grid")
    sw.add_argument("--mode", choices=("warm", "cold"))
    sw.add_argument("--fd-step", type=float, help="local stencil step (0 disables)")
    sw.add_argument("--alpha-star", type=float)

    bf = sub.add_parser("bifurcate", parents=[common], help="small-mass diagnostics")
    bf.add_argument("--theta", type=float)
    bf.add_argument("--eps-grid", help="comma list or logspace:a:b:n")

    def evolve_flags(sp):
        constraint_flags(sp)
        sp.add_argument("--dt", type=float)
        sp.add_argument("--horizon", type=float)
        sp.add_argument("--sample-dt", type=float)

    ev = sub.add_parser("evolve", parents=[common], help="time-evolve a (perturbed) solution")
    evolve_flags(ev)
    ev.add_argument("--delta", type=float)
    ev.add_argument("--kind", choices=("bump", "rotation", "tangent"))
    ev.add_argument("--perturb-seed", type=int)
    ev.add_argument("--snapshots", help="comma-separated snapshot times")

    st = sub.add_parser("stability", parents=[common], help="orbital-stability experiments")
    evolve_flags(st)
    st.add_argument("--deltas")
    st.add_argument("--kinds")
    st.add_argument("--pseeds", help="perturbation seeds, comma-separated")

    ac = sub.add_parser("acceptance", parents=[common], help="run the acceptance suite")
    ac.add_argument("--half", action="store_true", help="halve the grid resolution")
    ac.add_argument("--degenerate", action="store_true",
                    help="also check that a degenerate config is rejected")
    ac.add_argument("--only", help="comma-separated criterion ids")
    return p


def run(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.command not in ("eig", "acceptance") and args.config is None:
            raise ConfigError(f"{args.command} needs --config with a [model] block")
        out = Path(cfg.get("output", args.out) if args.out == "gp_mass_out" else args.out)
        r = Run(out, args.command, argv, cfg, args.seed)
        code = COMMANDS[args.command](args, cfg, r)
        r.manifest()
        return EXIT_OK if code is None else code
    except DegenerateRegime as exc:
        print(f"gp-mass: degenerate regime: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except NoConvergence as exc:
        print(f"gp-mass: no convergence: {exc}", file=sys.stderr)
        return EXIT_NOCONV
    except (ConfigError, MismatchedGrid, OSError, tomllib.TOMLDecodeError) as exc:
        print(f"gp-mass: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except GPMassError as exc:
        if isinstance(exc, ValueError):
            print(f"gp-mass: configuration error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        print(f"gp-mass: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


def main() -> None:
    sys.exit(run())
