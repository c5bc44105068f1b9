"""Alternating-SGD toy GAN: a Gaussian generator against a learned or analytic critic."""

from __future__ import annotations

import csv
import dataclasses
import enum
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .analysis import _column_rule
from .core import make_builtin
from .critic_net import DEFAULT_WIDTHS, batch_forward_backward, forward, init_network, sgd_step
from .distributions import Density, bimodal_mixture, divergence_fixed_rule, gaussian_1d, optimal_critic
from .variational import Mode, SchemeConfig, bound_estimate, critic_objective, generator_objective

__all__ = [
    "CriticMode",
    "SCHEMES",
    "StepRecord",
    "TrainConfig",
    "TrainTrace",
    "default_generator_lr",
    "run_suite",
    "scheme_from_name",
    "train",
]

TRACE_SCHEMA = 1
ABORT_LIMIT = 1e3
MONITOR_SAMPLES = 4096


class CriticMode(str, enum.Enum):
    LEARNED = "learned"
    ANALYTIC = "analytic"


# name -> (generator divergence, mode); the critic divergence is JS4 throughout
SCHEMES = {
    "js": ("JS4", Mode.SATURATING),
    "js-nonsaturating": ("JS4", Mode.NON_SATURATING),
    "srkl": ("SRKL", Mode.SATURATING),
    "rkl": ("RKL", Mode.SATURATING),
    "igog": ("IGOG", Mode.SATURATING),
    "kl": ("KL", Mode.SATURATING),
}
SUITE_SCHEMES = ("js", "js-nonsaturating", "rkl", "igog")


def scheme_from_name(name: str, critic: str = "JS4") -> SchemeConfig:
    key = name.lower().replace("_", "-")
    if key == "js-saturating":
        key = "js"
    if key not in SCHEMES:
        raise ValueError(f"unknown scheme {name!r}; choose from {', '.join(SCHEMES)}")
    gen, mode = SCHEMES[key]
    return SchemeConfig(make_builtin(gen), make_builtin(critic), mode)


def default_generator_lr(scheme: SchemeConfig) -> float:
    """4e-3 for saturating Jensen-Shannon, 2e-3 for every other generator loss."""
    if scheme.mode is Mode.SATURATING and scheme.generator_divergence.name == "JS4":
        return 4e-3
    return 2e-3


def _default_scheme():
    return scheme_from_name("js")


@dataclass(frozen=True)
class TrainConfig:
    p: Density = field(default_factory=bimodal_mixture)
    init_mu: float = 1.8
    init_sigma: float = 1.8
    scheme: SchemeConfig = field(default_factory=_default_scheme)
    critic_mode: CriticMode = CriticMode.LEARNED
    generator_lr: float | None = None
    critic_lr: float = 2e-2
    batch_size: int = 256
    critic_steps_per_generator_step: int = 5
    total_generator_steps: int = 4000
    seed: int = 0
    sigma_floor: float = 1e-3
    log_every: int = 10
    critic_widths: tuple = DEFAULT_WIDTHS

    def __post_init__(self):
        object.__setattr__(self, "critic_mode", CriticMode(self.critic_mode))
        if self.generator_lr is None:
            object.__setattr__(self, "generator_lr", default_generator_lr(self.scheme))
        if self.p.dimensions != 1:
            raise ValueError("the toy experiment uses a one-dimensional target")
        if not (self.generator_lr > 0 and self.critic_lr > 0):
            raise ValueError("learning rates must be positive")
        if not (self.init_sigma > self.sigma_floor > 0):
            raise ValueError("need init_sigma > sigma_floor > 0")
        if self.batch_size < 1 or self.critic_steps_per_generator_step < 0 or self.total_generator_steps < 0:
            raise ValueError("batch size must be positive and step counts nonnegative")
        if self.log_every < 1:
            raise ValueError("log_every must be at least 1")

    def to_dict(self) -> dict:
        return {
            "p": self.p.to_dict(),
            "init_mu": self.init_mu,
            "init_sigma": self.init_sigma,
            "generator_divergence": self.scheme.generator_divergence.name,
            "critic_divergence": self.scheme.critic_divergence.name,
            "mode": self.scheme.mode.value,
            "critic_mode": self.critic_mode.value,
            "generator_lr": self.generator_lr,
            "critic_lr": self.critic_lr,
            "batch_size": self.batch_size,
            "critic_steps_per_generator_step": self.critic_steps_per_generator_step,
            "total_generator_steps": self.total_generator_steps,
            "seed": self.seed,
            "sigma_floor": self.sigma_floor,
            "log_every": self.log_every,
            "critic_widths": list(self.critic_widths),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        data = dict(data)
        kwargs = {}
        if "p" in data:
            kwargs["p"] = Density.from_dict(data.pop("p"))
        gen = data.pop("generator_divergence", None)
        crit = data.pop("critic_divergence", "JS4")
        mode = data.pop("mode", "saturating")
        scheme = data.pop("scheme", None)
        if scheme is not None:
            kwargs["scheme"] = scheme_from_name(scheme, crit)
        elif gen is not None:
            kwargs["scheme"] = SchemeConfig(make_builtin(gen), make_builtin(crit), mode)
        if "critic_widths" in data:
            data["critic_widths"] = tuple(data["critic_widths"])
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**kwargs, **data)


@dataclass(frozen=True)
class StepRecord:
    step: int
    mu: float
    sigma: float
    generator_loss: float | None
    critic_value: float | None
    divergence_estimate: float | None


CSV_COLUMNS = ("step", "mu", "sigma", "gen_loss", "critic_value", "div_estimate")


@dataclass
class TrainTrace:
    steps: list
    config_echo: dict
    final_params: tuple
    status: str = "ok"
    diagnostic: str = ""
    metadata: dict = field(default_factory=dict)

    def arrays(self) -> dict:
        """Columns as float arrays, with missing entries as NaN."""
        cols = {}
        for name in ("step", "mu", "sigma", "generator_loss", "critic_value", "divergence_estimate"):
            cols[name] = np.array([np.nan if getattr(r, name) is None else getattr(r, name) for r in self.steps])
        return cols

    def same_trajectory(self, other: "TrainTrace") -> bool:
        """Bit-for-bit equality of all logged numbers (the config echo is ignored)."""
        return self.steps == other.steps and self.final_params == other.final_params

    def to_dict(self) -> dict:
        return {
            "schema_version": TRACE_SCHEMA,
            "status": self.status,
            "diagnostic": self.diagnostic,
            "final_params": list(self.final_params),
            "config": self.config_echo,
            "metadata": self.metadata,
            "steps": [dataclasses.asdict(r) for r in self.steps],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TrainTrace":
        if "steps" not in data or "final_params" not in data:
            raise ValueError("not a training trace")
        return cls(
            [StepRecord(**r) for r in data["steps"]],
            data.get("config", {}),
            tuple(data["final_params"]),
            data.get("status", "ok"),
            data.get("diagnostic", ""),
            data.get("metadata", {}),
        )

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=1)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.steps:
            w.writerow([r.step, repr(r.mu), repr(r.sigma)] + [
                "" if v is None else repr(v) for v in (r.generator_loss, r.critic_value, r.divergence_estimate)
            ])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


class _LearnedCritic:
    def __init__(self, config, rng_init):
        self.net = init_network(config.critic_widths, rng_init)

    def __call__(self, x):
        return forward(self.net, x)

    def values_and_input_grad(self, x):
        out, bundle = batch_forward_backward(self.net, x, np.ones(len(x)))
        return out, bundle.input_grad[:, 0]


def _critic_updates(config, critic, rng, mu, sigma):
    h = config.scheme.critic_divergence
    n = config.batch_size
    value = None
    for _ in range(config.critic_steps_per_generator_step):
        xp = config.p.sample(n, rng=rng)
        xq = mu + sigma * rng.standard_normal(n)
        x = np.concatenate([xp, xq])
        d = forward(critic.net, x)
        value, gp, gq = critic_objective(h, d[:n], d[n:])
        _, bundle = batch_forward_backward(critic.net, x, np.concatenate([gp, gq]))
        critic.net = sgd_step(critic.net, bundle, config.critic_lr, "ascend")
    return value


def _monitor(config, critic, mu, sigma, rng_mon):
    """Critic objective and divergence estimate at a logged step."""
    q = gaussian_1d(mu, sigma)
    target = config.scheme.minimized_divergence
    if config.critic_mode is CriticMode.ANALYTIC:
        d_star = optimal_critic(config.p, q)
        xp = config.p.sample(MONITOR_SAMPLES, rng=rng_mon)
        xq = q.sample(MONITOR_SAMPLES, rng=rng_mon)
        crit = bound_estimate(config.scheme.critic_divergence, xp, xq, d_star).value
        with np.errstate(all="ignore"):
            est = float(divergence_fixed_rule(target, config.p, mu, sigma, _column_rule(config.p, np.array([mu]), sigma)))
        return crit, est
    xp = config.p.sample(MONITOR_SAMPLES, rng=rng_mon)
    xq = q.sample(MONITOR_SAMPLES, rng=rng_mon)
    return None, bound_estimate(target, xp, xq, critic).value


def _record(step, mu, sigma, loss, crit, est):
    def clean(v):
        return None if v is None or not math.isfinite(v) else float(v)

    return StepRecord(step, float(mu), float(sigma), clean(loss), clean(crit), clean(est))


def train(config: TrainConfig) -> TrainTrace:
    """Run alternating SGD and return the full trajectory.

    Generator parameters are ``(mu, sigma)`` with ``x = mu + sigma z``.  In
    learned mode the critic network is updated ``critic_steps`` times before
    every generator step; in analytic mode the optimal critic of the current
    generator is used directly.
    """
    root = np.random.SeedSequence(config.seed)
    ss_train, ss_init, ss_mon = root.spawn(3)
    rng = np.random.default_rng(ss_train)
    rng_mon = np.random.default_rng(ss_mon)
    learned = config.critic_mode is CriticMode.LEARNED
    critic = _LearnedCritic(config, np.random.default_rng(ss_init)) if learned else None

    scheme = config.scheme
    mu, sigma = float(config.init_mu), float(config.init_sigma)
    n = config.batch_size
    crit0, est0 = _monitor(config, critic, mu, sigma, rng_mon)
    steps = [_record(0, mu, sigma, None, crit0, est0)]
    status, diagnostic = "ok", ""

    for k in range(1, config.total_generator_steps + 1):
        crit_val = None
        if learned:
            crit_val = _critic_updates(config, critic, rng, mu, sigma)
        z = rng.standard_normal(n)
        x = mu + sigma * z
        if learned:
            d, dprime = critic.values_and_input_grad(x)
        else:
            d_star = optimal_critic(config.p, gaussian_1d(mu, sigma))
            d, dprime = d_star(x), d_star.input_grad(x)
        loss, dloss_dd = generator_objective(scheme.generator_divergence, scheme.mode, d)
        # dloss_dd already carries the 1/n of the batch mean
        chain = dloss_dd * dprime
        g_mu, g_sigma = float(np.sum(chain)), float(np.sum(chain * z))
        mu -= config.generator_lr * g_mu
        sigma = max(sigma - config.generator_lr * g_sigma, config.sigma_floor)

        if not (math.isfinite(mu) and math.isfinite(sigma)) or abs(mu) > ABORT_LIMIT or sigma > ABORT_LIMIT:
            status = "diverged"
            diagnostic = f"parameters left the region |mu|, sigma <= {ABORT_LIMIT:g} at step {k}: mu={mu}, sigma={sigma}"
            steps.append(_record(k, mu, sigma, loss, crit_val, None))
            break

        est = None
        if k % config.log_every == 0 or k == config.total_generator_steps:
            mcrit, est = _monitor(config, critic, mu, sigma, rng_mon)
            if not learned:
                crit_val = mcrit
        steps.append(_record(k, mu, sigma, loss, crit_val, est))

    metadata = {
        "critic_init": "glorot-uniform weights, zero biases" if learned else "analytic optimal critic",
        "batches": "fresh independent batches for every critic and generator update",
        "rng": "numpy PCG64; SeedSequence(seed) spawns training, critic-init and monitoring streams",
        "divergence_estimate": ("fixed-rule quadrature" if not learned else "variational bound with the current critic")
        + f" of {scheme.minimized_divergence.name}",
        "non_saturating_scaling": "the non-saturating loss uses a_f of JS4 directly, which already equals "
        "twice the conventional -E[log sigmoid(d)] loss up to a constant",
    }
    return TrainTrace(steps, config.to_dict(), (mu, sigma), status, diagnostic, metadata)


def run_suite(base: TrainConfig | None = None, seeds=None) -> list:
    """Four schemes x {learned, analytic} x two seeds, all with a JS4 critic."""
    base = base or TrainConfig()
    seeds = seeds if seeds is not None else (base.seed, base.seed + 1)
    traces = []
    for name in SUITE_SCHEMES:
        scheme = scheme_from_name(name)
        for mode in (CriticMode.LEARNED, CriticMode.ANALYTIC):
            for seed in seeds:
                cfg = dataclasses.replace(base, scheme=scheme, critic_mode=mode, seed=seed,
                                          generator_lr=default_generator_lr(scheme))
                trace = train(cfg)
                trace.metadata["scheme"] = name
                traces.append(trace)
    return traces
