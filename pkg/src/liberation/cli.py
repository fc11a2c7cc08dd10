"""Command line interface.

Every subcommand resolves a :class:`RunConfig` from an optional JSON file
and the command-line flags (flags win), validates it completely, computes
everything in memory and only then writes its files.  Reports embed the
resolved configuration.

Exit codes: 0 ok, 1 usage or configuration error, 2 numerical failure,
3 verification failure.
"""
import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import domain, export, flow, inversion, mc_oracle, measures, verify
from .errors import DomainError, LiberationError
from .transforms import h_infinity

__all__ = ["RunConfig", "ConfigError", "main", "build_parser"]

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_VERIFY = 0, 1, 2, 3
COMMANDS = ("flow", "boundary", "density", "mu-density", "atoms", "verify", "mc", "compare")
DEFAULT_GRID = {"boundary": 180, "density": 2048, "mu-density": 2000, "atoms": 512,
                "compare": 2048, "mc": 2048}
# abscissae for the interval law in Monte Carlo comparisons; enough for KS
MC_MU_GRID = 400
# share of grid points allowed to fail inversion before a run is rejected
MAX_FAILED_SHARE = 0.01


class ConfigError(Exception):
    """Invalid configuration or command-line usage."""


@dataclass
class RunConfig:
    """Resolved run configuration.

    ``preset`` is one of ``equal``, ``free``, ``custom``, ``haar``; for
    ``custom`` the measure comes from ``custom`` (a path or an inline
    document).  ``t`` is a sorted list of non-negative times.  ``grid`` is
    the number of rays, angles or abscissae depending on the command.
    """

    preset: str = "free"
    alpha: float = None
    beta: float = None
    custom: object = None
    t: list = field(default_factory=lambda: [0.5])
    tol: float = flow.DEFAULT_TOL
    boundary_tol: float = 1e-6
    grid: int = None
    eps: float = 1e-4
    threshold: float = inversion.ATOM_THRESHOLD
    out: str = "out"
    seed: int = 0
    workers: int = None
    seeds: list = field(default_factory=lambda: [[0.0, 0.0], [0.5, 0.0], [0.0, 0.5],
                                                 [-0.3, 0.2]])
    N: int = 512
    trials: int = 20
    steps: int = None
    p: float = None
    q: float = None
    coupling: str = None
    angles: list = field(default_factory=list)
    samples: str = None
    kind: str = "nu"

    @classmethod
    def from_dict(cls, doc):
        known = {f.name for f in fields(cls)}
        extra = sorted(set(doc) - known)
        if extra:
            raise ConfigError(f"unknown config key(s): {', '.join(extra)}")
        cfg = cls(**{k: v for k, v in doc.items() if v is not None})
        cfg.validate()
        return cfg

    def validate(self):
        if self.preset not in measures.PRESETS:
            raise ConfigError(f"preset must be one of {measures.PRESETS}")
        try:
            self.t = [float(x) for x in (self.t if isinstance(self.t, (list, tuple))
                                         else [self.t])]
        except (TypeError, ValueError):
            raise ConfigError("t must be a number or a list of numbers") from None
        if not self.t or any(x < 0 or not np.isfinite(x) for x in self.t):
            raise ConfigError("time points must be finite and non-negative")
        if any(b <= a for a, b in zip(self.t, self.t[1:])):
            raise ConfigError("time points must be strictly increasing")
        for name in ("tol", "boundary_tol"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and 1e-14 <= v <= 1e-2):
                raise ConfigError(f"{name} must lie in [1e-14, 1e-2]")
        if not (isinstance(self.eps, (int, float)) and 1e-6 <= self.eps <= 1e-2):
            raise ConfigError("eps must lie in [1e-6, 1e-2]")
        for name in ("grid", "N", "trials", "steps", "workers"):
            v = getattr(self, name)
            if v is not None and (not isinstance(v, int) or isinstance(v, bool) or v < 1):
                raise ConfigError(f"{name} must be a positive integer")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError("seed must be a non-negative integer")
        if self.kind not in ("nu", "mu"):
            raise ConfigError("kind must be 'nu' or 'mu'")
        try:
            self.seeds = [complex(*s) if isinstance(s, (list, tuple)) else complex(s)
                          for s in self.seeds]
        except (TypeError, ValueError):
            raise ConfigError("seeds must be [re, im] pairs") from None
        if any(abs(z) >= 1 for z in self.seeds):
            raise ConfigError("seeds must lie in the open unit disc")

    def to_dict(self):
        out = asdict(self)
        out["seeds"] = [[z.real, z.imag] for z in self.seeds]
        return out


def _custom_document(cfg):
    if cfg.custom is None:
        raise ConfigError("preset 'custom' needs a 'custom' measure (path or document)")
    return cfg.custom if isinstance(cfg.custom, dict) else str(cfg.custom)


def initial_data(cfg):
    """:class:`InitialData` for the configured preset; config errors become :class:`ConfigError`."""
    try:
        if cfg.preset == "custom":
            m, alpha, beta = measures.load_custom(_custom_document(cfg))
            alpha = alpha if cfg.alpha is None else cfg.alpha
            beta = beta if cfg.beta is None else cfg.beta
            return measures.preset("custom", alpha=alpha, beta=beta, measure=m)
        if cfg.preset == "equal":
            if cfg.alpha is None:
                raise ConfigError("preset 'equal' needs alpha")
            return measures.preset("equal", alpha=cfg.alpha, beta=cfg.beta)
        return measures.preset(cfg.preset, alpha=cfg.alpha, beta=cfg.beta)
    except (DomainError, OSError, json.JSONDecodeError) as exc:
        raise ConfigError(str(exc)) from exc


def model_spec(cfg, t):
    """Matrix model for the configured preset at time ``t``."""
    alpha = 0.0 if cfg.alpha is None else cfg.alpha
    beta = alpha if cfg.preset == "equal" and cfg.beta is None else (
        0.0 if cfg.beta is None else cfg.beta)
    p = (1 + alpha) / 2 if cfg.p is None else cfg.p
    q = (1 + beta) / 2 if cfg.q is None else cfg.q
    coupling = cfg.coupling or {"equal": "equal", "free": "haar-free",
                                "custom": "principal-angles"}.get(cfg.preset)
    if coupling is None:
        raise ConfigError(f"no matrix model for preset {cfg.preset!r}; set 'coupling'")
    try:
        return mc_oracle.MatrixModelSpec(N=cfg.N, p=p, q=q, t=t, coupling=coupling,
                                         angles=tuple(cfg.angles), steps=cfg.steps,
                                         trials=cfg.trials, seed=cfg.seed)
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc


def _tag(t):
    return f"{t:g}"


class Outputs:
    """Files staged in memory and written together."""

    def __init__(self, root):
        self.root = Path(root)
        self.items = []

    def csv(self, name, header, rows):
        self.items.append((name, lambda p: export.write_csv(p, header, rows)))

    def json(self, name, doc):
        self.items.append((name, lambda p: export.write_json(p, doc)))

    def custom(self, name, writer):
        self.items.append((name, writer))

    def flush(self):
        self.root.mkdir(parents=True, exist_ok=True)
        for name, writer in self.items:
            writer(self.root / name)
        return [name for name, _ in self.items]


class NumericalFailure(Exception):
    def __init__(self, message, detail=None):
        super().__init__(message)
        self.detail = detail or {}


# -- commands -----------------------------------------------------------------

def cmd_flow(cfg, out):
    init = initial_data(cfg)
    horizon = cfg.t[-1]
    report = []
    for k, z in enumerate(cfg.seeds):
        tr = flow.integrate(z, init, horizon, tol=cfg.tol)
        if tr.status == "failed":
            raise NumericalFailure(f"integrator failed for seed {z}", {"message": tr.message})
        inside = np.abs(tr.phi) < 1
        stat = np.full(tr.t.shape, np.nan)
        rel = np.full(tr.t.shape, np.nan)
        hinf = h_infinity(tr.phi[inside], init.params)
        stat[inside] = np.abs(tr.w[inside] - hinf)
        # near +-1 H_inf blows up and only the relative gap is meaningful
        rel[inside] = stat[inside] / np.maximum(1.0, np.abs(hinf))
        cols = [tr.t, tr.phi.real, tr.phi.imag, tr.w.real, tr.w.imag, tr.v.real, tr.v.imag,
                tr.u.real, tr.u.imag, stat, rel]
        out.csv(f"flow_seed{k}.csv",
                ["t", "re_phi", "im_phi", "re_w", "im_w", "re_v", "im_v", "re_u", "im_u",
                 "stationarity", "stationarity_rel"], zip(*cols))
        report.append({
            "seed": [z.real, z.imag], "file": f"flow_seed{k}.csv", "status": tr.status,
            "exit_time": tr.exit_time, "horizon": horizon,
            "residual_char_eq": flow.residual_char_eq(tr, init),
            "residual_k_subordination": flow.residual_k_subordination(tr, init),
            "residual_exp_form": flow.residual_exp_form(tr),
            "ibp_residual": flow.ibp_check(tr),
            "imag_log_bound_violation": flow.imag_log_bound_violation(tr),
            "stationarity_max": float(np.nanmax(stat)) if inside.any() else None,
            "stationarity_rel_max": float(np.nanmax(rel)) if inside.any() else None,
        })
    out.json("flow_report.json", {"config": cfg.to_dict(), "initial": init.describe(),
                                  "seeds": report})
    return EXIT_OK


def cmd_boundary(cfg, out):
    init = initial_data(cfg)
    if cfg.t[0] <= 0:
        raise ConfigError("boundary needs t > 0")
    n = cfg.grid or DEFAULT_GRID["boundary"]
    snaps, report = [], []
    for t in cfg.t:
        s = domain.trace_boundary(t, n, init, tol=cfg.boundary_tol, integ_tol=cfg.tol)
        snaps.append(s)
        mirror = (n - 2 - np.arange(n)) % n
        pts = s.points
        out.csv(f"boundary_t{_tag(t)}.csv", ["theta", "r", "kind", "x", "y"],
                zip(s.theta, s.r, s.kind, pts.real, pts.imag))
        report.append({"t": t, "file": f"boundary_t{_tag(t)}.csv", "x_minus": s.x_minus,
                       "x_plus": s.x_plus, "threshold": s.threshold,
                       "circle_rays": int(np.sum(s.kind == domain.CIRCLE)),
                       "symmetry_residual": float(np.max(np.abs(s.r - s.r[mirror]))),
                       "simple_closed": domain.is_simple_closed(pts), "flags": s.flags})
    nesting = [{"t_inner": b.t, "t_outer": a.t, "nested": domain.nested(b, a),
                "max_growth": float(np.max(b.r - a.r))} for a, b in zip(snaps, snaps[1:])]
    out.custom("boundary.svg", lambda p: export.boundary_svg(
        p, [s.points for s in snaps], [f"t = {s.t:g}" for s in snaps]))
    out.json("boundary_report.json", {"config": cfg.to_dict(), "initial": init.describe(),
                                      "snapshots": report, "nesting": nesting,
                                      "nesting_ok": all(x["nested"] for x in nesting)})
    return EXIT_OK


def _check_failures(prof):
    n = prof.grid.size
    if len(prof.failures) > MAX_FAILED_SHARE * n:
        raise NumericalFailure(f"inversion failed at {len(prof.failures)} of {n} points",
                               {"failures": prof.failures})


def cmd_density(cfg, out):
    init = initial_data(cfg)
    n = cfg.grid or DEFAULT_GRID["density"]
    for t in cfg.t:
        prof = inversion.nu_density(t, n, cfg.eps, init, cfg.threshold)
        _check_failures(prof)
        name = f"density_t{_tag(t)}"
        out.csv(name + ".csv", ["theta", "density"], zip(prof.grid, prof.values))
        header = {**prof.header(), "config": cfg.to_dict(), "initial": init.describe(),
                  "m1": prof.moment(1).real, "m1_contour": inversion.nu_moment(t, init).real,
                  "m1_law": verify.m1_law(t, init)}
        out.json(name + ".json", header)
        out.custom(name + ".svg", lambda p, prof=prof, t=t: export.line_svg(
            p, prof.grid, prof.values, prof.atoms, f"nu_t density, t = {t:g}"))
    return EXIT_OK


def cmd_mu_density(cfg, out):
    init = initial_data(cfg)
    n = cfg.grid or DEFAULT_GRID["mu-density"]
    pa = init.params
    for t in cfg.t:
        prof = inversion.mu_density(t, n, cfg.eps, init, cfg.threshold)
        name = f"mu_density_t{_tag(t)}"
        out.csv(name + ".csv", ["x", "density"], zip(prof.grid, prof.values))
        m1_nu = inversion.nu_moment(t, init).real
        header = {**prof.header(), "config": cfg.to_dict(), "initial": init.describe(),
                  "first_moment": prof.moment(1),
                  "first_moment_link": (1 + pa.alpha + pa.beta + m1_nu) / 4}
        out.json(name + ".json", header)
        out.custom(name + ".svg", lambda p, prof=prof, t=t: export.line_svg(
            p, prof.grid, prof.values, prof.atoms, f"mu_t density, t = {t:g}"))
    return EXIT_OK


def cmd_atoms(cfg, out):
    init = initial_data(cfg)
    n = cfg.grid or DEFAULT_GRID["atoms"]
    rows, report = [], []
    for t in cfg.t:
        nu = inversion.nu_density(t, n, cfg.eps, init, cfg.threshold)
        _check_failures(nu)
        mu = [(x0, inversion.mu_atom_mass(t, x0, init)) for x0 in (0.0, 1.0)]
        mu = [(x0, m) for x0, m in mu if m > 0]
        rows += [(t, "nu", th, m) for th, m in nu.atoms] + [(t, "mu", x, m) for x, m in mu]
        report.append({"t": t, "nu": [{"theta": th, "mass": m} for th, m in nu.atoms],
                       "mu": [{"x": x, "mass": m} for x, m in mu]})
    out.csv("atoms.csv", ["t", "kind", "location", "mass"], rows)
    out.json("atoms.json", {"config": cfg.to_dict(), "initial": init.describe(),
                            "threshold": cfg.threshold, "atoms": report})
    return EXIT_OK


def cmd_verify(cfg, out, suite):
    if suite not in verify.SUITES:
        raise ConfigError(f"unknown suite {suite!r}; expected one of {sorted(verify.SUITES)}")
    checks, ok = verify.run_suite(suite)
    for c in checks:
        print(c.line() + ("" if c.counted else " [not counted]"))
    out.json(f"verify_{suite}.json", {"suite": suite, "passed": ok,
                                      "checks": [c.to_dict() for c in checks]})
    return EXIT_OK if ok else EXIT_VERIFY


def _profiles(cfg, init, t, n):
    nu = inversion.nu_density(t, n, cfg.eps, init, cfg.threshold)
    _check_failures(nu)
    # the interval side needs a finer offset where the density has inverse
    # square-root edges
    mu = inversion.mu_density(t, MC_MU_GRID, min(cfg.eps, 1e-5), init, cfg.threshold)
    return nu, mu


def cmd_mc(cfg, out):
    specs = [model_spec(cfg, t) for t in cfg.t]
    workers = cfg.workers or os.cpu_count() or 1
    n = cfg.grid or DEFAULT_GRID["mc"]
    runs = []
    for spec in specs:
        phases, pq, traces = mc_oracle.simulate(spec, workers)
        init = verify.mc_initial_data(spec)
        nu, mu = _profiles(cfg, init, spec.t, n)
        tag = _tag(spec.t)
        out.csv(f"mc_phases_t{tag}.csv", ["trial", "theta"], zip(phases.trial, phases.values))
        out.csv(f"mc_pq_t{tag}.csv", ["trial", "x"], zip(pq.trial, pq.values))
        tr = traces.real
        runs.append({
            "spec": spec.to_dict(),
            "nu": mc_oracle.compare(phases, nu), "mu": mc_oracle.compare(pq, mu),
            "trace_mean": float(tr.mean()),
            "trace_stderr": float(tr.std(ddof=1) / np.sqrt(tr.size)) if tr.size > 1 else None,
            "trace_limit": float(np.exp(-spec.t / 2)),
            "phase_mean": float(np.mean(np.cos(phases.values))),
            "pq_mean": float(np.mean(pq.values)),
            "m1_law": verify.m1_law(spec.t, init),
        })
    out.json("mc_report.json", {"config": cfg.to_dict(), "runs": runs})
    return EXIT_OK


def _read_samples(path):
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read samples {path!r}: {exc}") from exc
    if data.size == 0:
        raise ConfigError("empty sample file")
    return data[:, -1]


def cmd_compare(cfg, out):
    if cfg.samples is None:
        raise ConfigError("compare needs a samples file")
    if len(cfg.t) != 1:
        raise ConfigError("compare takes a single time point")
    x = _read_samples(cfg.samples)
    init = initial_data(cfg)
    t = cfg.t[0]
    if cfg.kind == "nu":
        prof = inversion.nu_density(t, cfg.grid or DEFAULT_GRID["compare"], cfg.eps, init,
                                    cfg.threshold)
        _check_failures(prof)
    else:
        prof = inversion.mu_density(t, cfg.grid or DEFAULT_GRID["mu-density"], cfg.eps,
                                    init, cfg.threshold)
    pa = init.params
    rep = {**mc_oracle.compare(x, prof), "realized_alpha": pa.alpha, "realized_beta": pa.beta}
    out.json("compare_report.json", {"config": cfg.to_dict(), "comparison": rep})
    return EXIT_OK


# -- entry point ----------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _times(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid time list {text!r}") from None


def build_parser():
    parser = _Parser(prog="liberation", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file; flags override its keys")
        p.add_argument("--preset", choices=measures.PRESETS)
        p.add_argument("--alpha", type=float)
        p.add_argument("--beta", type=float)
        p.add_argument("--t", type=_times, help="time or comma separated times")
        p.add_argument("--tol", type=float, help="integrator tolerance")
        p.add_argument("--grid", type=int)
        p.add_argument("--eps", type=float, help="boundary offset for density recovery")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int)
        p.add_argument("--workers", type=int)
        if name == "verify":
            p.add_argument("suite")
        if name == "compare":
            p.add_argument("samples", help="CSV with the sample values in the last column")
            p.add_argument("--kind", choices=("nu", "mu"))
    return parser


def resolve_config(args):
    doc = {}
    if args.config:
        try:
            doc = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config!r}: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
    for key in ("preset", "alpha", "beta", "t", "tol", "grid", "eps", "out", "seed",
                "workers", "samples", "kind"):
        v = getattr(args, key, None)
        if v is not None:
            doc[key] = v
    return RunConfig.from_dict(doc)


HANDLERS = {"flow": cmd_flow, "boundary": cmd_boundary, "density": cmd_density,
            "mu-density": cmd_mu_density, "atoms": cmd_atoms, "mc": cmd_mc,
            "compare": cmd_compare}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out = Outputs(cfg.out)
    try:
        if args.command == "verify":
            code = cmd_verify(cfg, out, args.suite)
        else:
            code = HANDLERS[args.command](cfg, out)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalFailure, LiberationError) as exc:
        detail = getattr(exc, "detail", {})
        err = Outputs(cfg.out)
        err.json("error.json", {"command": args.command, "error": type(exc).__name__,
                                "message": str(exc), "detail": detail,
                                "config": cfg.to_dict()})
        err.flush()
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    for name in out.flush():
        print(Path(cfg.out) / name)
    return code


if __name__ == "__main__":
    sys.exit(main())
