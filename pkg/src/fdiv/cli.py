"""Command-line entry point: ``fdiv <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .algebra import bounds, tail_weights
from .analysis import DEFAULT_MU_RANGE, DEFAULT_SIGMA_RANGE, contour_grid
from .core import BUILTIN_NAMES, DomainError, make_builtin, s_curve
from .critic_net import load_network
from .distributions import (
    Density,
    FitError,
    QuadratureError,
    bimodal_mixture,
    circle_of_gaussians,
    fit_gaussian,
    load_density,
    optimal_critic,
)
from .pushforward import divergence_from_pushforward, pushforward_empirical
from .trainer import SCHEMES, TrainConfig, run_suite, train
from .variational import bound_estimate

SCHEMA_VERSION = 1
MONITOR_DIVERGENCES = ("KL", "RKL", "SRKL", "JS4")

PRESETS = {
    "bimodal": bimodal_mixture,
    "circle-of-gaussians": circle_of_gaussians,
    "correlated-2d": lambda: Density.gaussian([0.0, 0.0], [[5.5, 4.5], [4.5, 5.5]]),
}


class UsageError(Exception):
    pass


class NumericFailure(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _density(source: str) -> Density:
    if source in PRESETS:
        return PRESETS[source]()
    if not os.path.exists(source):
        raise UsageError(f"{source!r} is neither a density file nor a preset ({', '.join(PRESETS)})")
    try:
        return load_density(source)
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read density {source!r}: {exc}") from exc


def _divergence(name: str):
    try:
        return make_builtin(name)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _critic(source: str, p, q):
    if source == "optimal":
        return optimal_critic(p, q)
    try:
        return load_network(source)
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot load critic checkpoint {source!r}: {exc}") from exc


def _emit(text: str, out: str | None):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _dump(obj) -> str:
    return json.dumps(obj, indent=1) + "\n"


# --------------------------------------------------------------------------
# subcommands


def cmd_sfcurves(args):
    divs = [_divergence(n) for n in args.divergences]
    d = np.linspace(args.d_min, args.d_max, args.points)
    cols = [np.asarray(s_curve(div, d)) for div in divs]
    lines = [",".join(["d"] + [f"s_{div.name}" for div in divs])]
    for i, di in enumerate(d):
        lines.append(",".join([repr(float(di))] + [repr(float(c[i])) for c in cols]))
    _emit("\n".join(lines) + "\n", args.out)


def _finite_or_none(x):
    return None if x is None or not np.isfinite(x) else float(x)


def tailweight_rows(names=BUILTIN_NAMES):
    rows = []
    for name in names:
        div = make_builtin(name)
        tw, bd = tail_weights(div), bounds(div)
        rows.append({
            "name": div.name,
            "L": tw.left,
            "R": tw.right,
            "bounded": tw.bounded,
            "m0": _finite_or_none(bd.m0),
            "m_inf": _finite_or_none(bd.m_inf),
            "m": _finite_or_none(bd.m),
            "status": tw.status,
        })
    return rows


def cmd_tailweights(args):
    rows = tailweight_rows([_divergence(n).name for n in args.divergences])
    if args.format == "json":
        _emit(_dump({"schema_version": SCHEMA_VERSION, "rows": rows}), args.out)
        return
    lines = [f"{'divergence':<12} {'L':>6} {'R':>6}  bounded  M"]
    for r in rows:
        fmt = lambda v: "  n/a" if v is None else f"{round(v, 3) + 0.0:6.3f}"  # noqa: E731
        m = "inf" if r["m"] is None else f"{r['m']:.6f}"
        lines.append(f"{r['name']:<12} {fmt(r['L'])} {fmt(r['R'])}  {str(r['bounded']):<7}  {m}")
    _emit("\n".join(lines) + "\n", args.out)


def cmd_estimate(args):
    p, q = _density(args.p), _density(args.q)
    div = _divergence(args.divergence)
    critic = _critic(args.critic, p, q)
    sp, sq = np.random.SeedSequence(args.seed).spawn(2)
    xp = p.sample(args.samples, rng=np.random.default_rng(sp))
    xq = q.sample(args.samples, rng=np.random.default_rng(sq))
    est = bound_estimate(div, xp, xq, critic)
    out = {"schema_version": SCHEMA_VERSION, "divergence": div.name,
           "critic": getattr(critic, "label", "learned"), "seed": args.seed, **est.to_dict()}
    _emit(_dump(out), args.out)


def cmd_pushforward(args):
    p, q = _density(args.p), _density(args.q)
    critic = _critic(args.critic, p, q)
    hist = pushforward_empirical(p, q, critic, n=args.samples, bins=args.bins, seed=args.seed,
                                 binning=args.binning)
    _emit(hist.to_csv(), args.out)
    sidecar = {
        "schema_version": SCHEMA_VERSION,
        "critic": hist.critic_label,
        "n_samples": hist.n_samples,
        "bins": int(hist.centers.size),
        "estimates": {n: divergence_from_pushforward(make_builtin(n), hist) for n in MONITOR_DIVERGENCES},
    }
    if args.out:
        with open(os.path.splitext(args.out)[0] + ".json", "w") as fh:
            fh.write(_dump(sidecar))
    else:
        sys.stderr.write(_dump(sidecar))


def cmd_contour(args):
    div, p = _divergence(args.divergence), _density(args.p)
    if p.dimensions != 1:
        raise UsageError("contour needs a one-dimensional target density")
    surf = contour_grid(div, p, tuple(args.mu_range), tuple(args.sigma_range), tuple(args.resolution))
    _emit(surf.to_csv(), args.out)
    mu, sigma, value = surf.argmin
    summary = {"schema_version": SCHEMA_VERSION, "divergence": div.name,
               "argmin": {"mu": mu, "sigma": sigma, "value": value}, "failures": len(surf.failures)}
    (sys.stdout if args.out else sys.stderr).write(_dump(summary))


def _train_config(args) -> TrainConfig:
    data = {}
    if args.config:
        try:
            with open(args.config) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config!r}: {exc}") from exc
    if args.scheme:
        data.pop("generator_divergence", None)
        data.pop("mode", None)
        data["scheme"] = args.scheme
    if "scheme" in data or "generator_divergence" in data:
        data.setdefault("generator_lr", None)
    for key, val in (("critic_mode", args.critic_mode), ("seed", args.seed),
                     ("total_generator_steps", args.steps)):
        if val is not None:
            data[key] = val
    if args.p is not None:
        data["p"] = _density(args.p).to_dict()
    try:
        return TrainConfig.from_dict(data)
    except (ValueError, TypeError, KeyError) as exc:
        raise UsageError(f"invalid training config: {exc}") from exc


def cmd_train(args):
    trace = train(_train_config(args))
    _emit(trace.to_json() + "\n", args.out)
    if args.csv:
        trace.to_csv(args.csv)
    if trace.status != "ok":
        raise NumericFailure(trace.diagnostic)


def cmd_suite(args):
    base = _train_config(args)
    os.makedirs(args.out_dir, exist_ok=True)
    seeds = tuple(range(base.seed, base.seed + args.n_seeds))
    traces = run_suite(base, seeds)
    summary = []
    for tr in traces:
        cfg = tr.config_echo
        stem = f"{tr.metadata['scheme']}_{cfg['critic_mode']}_seed{cfg['seed']}"
        tr.to_json(os.path.join(args.out_dir, stem + ".json"))
        tr.to_csv(os.path.join(args.out_dir, stem + ".csv"))
        summary.append({"file": stem + ".json", "scheme": tr.metadata["scheme"], "critic_mode": cfg["critic_mode"],
                        "seed": cfg["seed"], "final": list(tr.final_params), "status": tr.status})
    if args.surfaces:
        for name in ("JS4", "SRKL", "RKL", "IGOG"):
            surf = contour_grid(make_builtin(name), base.p)
            surf.to_csv(os.path.join(args.out_dir, f"surface_{name}.csv"))
    with open(os.path.join(args.out_dir, "suite.json"), "w") as fh:
        fh.write(_dump({"schema_version": SCHEMA_VERSION, "runs": summary}))
    sys.stdout.write(_dump({"schema_version": SCHEMA_VERSION, "runs": summary}))
    if any(tr.status != "ok" for tr in traces):
        raise NumericFailure("at least one run diverged")


def cmd_fit(args):
    p = _density(args.p)
    q = fit_gaussian(p, args.objective, args.constraint)
    _emit(_dump({"schema_version": SCHEMA_VERSION, "objective": args.objective.upper(),
                 "constraint": args.constraint, **q.to_dict()}), args.out)


# --------------------------------------------------------------------------


def _add_train_flags(sp):
    sp.add_argument("--config", help="JSON file with TrainConfig fields")
    sp.add_argument("--scheme", choices=sorted(SCHEMES) + ["js-saturating"])
    sp.add_argument("--critic", "--critic-mode", dest="critic_mode", choices=["learned", "analytic"])
    sp.add_argument("--seed", type=int)
    sp.add_argument("--steps", type=int, help="total generator steps")
    sp.add_argument("--p", help="target density file or preset")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fdiv", description="f-divergence calculus and toy GAN experiments")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    sp = sub.add_parser("sfcurves", help="tabulate symmetry-preserving curves s_f(d)")
    sp.add_argument("--divergences", nargs="+", default=list(BUILTIN_NAMES))
    sp.add_argument("--d-min", type=float, default=-8.0)
    sp.add_argument("--d-max", type=float, default=8.0)
    sp.add_argument("--points", type=int, default=401)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_sfcurves)

    sp = sub.add_parser("tailweights", help="tail weights and boundedness of built-in divergences")
    sp.add_argument("--format", choices=["text", "json"], default="text")
    sp.add_argument("--divergences", nargs="+", default=list(BUILTIN_NAMES))
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_tailweights)

    sp = sub.add_parser("estimate", help="Monte Carlo variational bound")
    sp.add_argument("--p", required=True)
    sp.add_argument("--q", required=True)
    sp.add_argument("--divergence", required=True)
    sp.add_argument("--critic", default="optimal", help="'optimal' or a network checkpoint")
    sp.add_argument("--samples", type=int, default=100_000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_estimate)

    sp = sub.add_parser("pushforward", help="histograms of critic outputs under p and q")
    sp.add_argument("--p", required=True)
    sp.add_argument("--q", required=True)
    sp.add_argument("--critic", default="optimal")
    sp.add_argument("--samples", type=int, default=100_000)
    sp.add_argument("--bins", type=int, default=100)
    sp.add_argument("--binning", choices=["uniform", "fd"], default="uniform")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", help="CSV path; a .json sidecar is written next to it")
    sp.set_defaults(func=cmd_pushforward)

    sp = sub.add_parser("contour", help="divergence surface over (mu, sigma)")
    sp.add_argument("--divergence", required=True)
    sp.add_argument("--p", default="bimodal")
    sp.add_argument("--mu-range", nargs=2, type=float, default=list(DEFAULT_MU_RANGE))
    sp.add_argument("--sigma-range", nargs=2, type=float, default=list(DEFAULT_SIGMA_RANGE))
    sp.add_argument("--resolution", nargs=2, type=int, default=[200, 200])
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_contour)

    sp = sub.add_parser("train", help="run one toy GAN training")
    _add_train_flags(sp)
    sp.add_argument("--out", help="trace JSON path")
    sp.add_argument("--csv", help="also write the trace as CSV")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("suite", help="the 16-run comparison of generator schemes")
    _add_train_flags(sp)
    sp.add_argument("--out-dir", required=True)
    sp.add_argument("--n-seeds", type=int, default=2)
    sp.add_argument("--surfaces", action="store_true", help="also write the four contour surfaces")
    sp.set_defaults(func=cmd_suite)

    sp = sub.add_parser("fit", help="closed-form or reverse-KL Gaussian fit")
    sp.add_argument("--p", required=True)
    sp.add_argument("--objective", choices=["KL", "RKL", "kl", "rkl"], required=True)
    sp.add_argument("--constraint", choices=["diagonal", "isotropic"], default="diagonal")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_fit)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except UsageError as exc:
        sys.stderr.write(f"fdiv: error: {exc}\n")
        return 1
    except (NumericFailure, QuadratureError, FitError, FloatingPointError, DomainError) as exc:
        sys.stderr.write(f"fdiv: numeric failure: {exc}\n")
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
