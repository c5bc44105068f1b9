import json
import math

import numpy as np
import pytest

from fdiv.distributions import bimodal_mixture, divergence_quadrature, gaussian_1d
from fdiv.trainer import (
    CSV_COLUMNS,
    SCHEMES,
    CriticMode,
    TrainConfig,
    TrainTrace,
    default_generator_lr,
    run_suite,
    scheme_from_name,
    train,
)
from fdiv.variational import Mode, variational_gradient

# sqrt of the mixture variance 0.5*0.09 + 0.5*1 + 0.25*4
KL_MOMENT_SIGMA = math.sqrt(1.545)


def cfg(scheme="js", **kw):
    return TrainConfig(scheme=scheme_from_name(scheme), **kw)


def test_defaults():
    c = TrainConfig()
    assert (c.init_mu, c.init_sigma) == (1.8, 1.8)
    assert (c.critic_lr, c.batch_size, c.critic_steps_per_generator_step, c.total_generator_steps) == (
        2e-2, 256, 5, 4000)
    assert c.generator_lr == 4e-3
    assert c.critic_mode is CriticMode.LEARNED
    assert c.p.log_density(0.0) == pytest.approx(bimodal_mixture().log_density(0.0))


def test_learning_rate_rule():
    assert default_generator_lr(scheme_from_name("js")) == 4e-3
    for name in ("js-nonsaturating", "srkl", "rkl", "igog"):
        assert default_generator_lr(scheme_from_name(name)) == 2e-3


def test_scheme_names():
    ns = scheme_from_name("js-nonsaturating")
    assert ns.mode is Mode.NON_SATURATING and ns.minimized_divergence.name == "SRKL"
    assert scheme_from_name("js-saturating").generator_divergence.name == "JS4"
    assert all(scheme_from_name(n).critic_divergence.name == "JS4" for n in SCHEMES)
    with pytest.raises(ValueError):
        scheme_from_name("wgan")


@pytest.mark.parametrize("bad", [dict(generator_lr=-1.0), dict(critic_lr=0.0), dict(init_sigma=1e-4),
                                 dict(sigma_floor=0.0), dict(batch_size=0), dict(total_generator_steps=-1)])
def test_invalid_config(bad):
    with pytest.raises(ValueError):
        cfg(**bad)


def test_zero_steps():
    for mode in CriticMode:
        tr = train(cfg(critic_mode=mode, total_generator_steps=0))
        assert len(tr.steps) == 1
        assert (tr.steps[0].step, tr.steps[0].mu, tr.steps[0].sigma) == (0, 1.8, 1.8)
        assert tr.final_params == (1.8, 1.8)
        assert tr.status == "ok"


def test_trace_length_and_logging_cadence():
    tr = train(cfg(critic_mode="analytic", total_generator_steps=25, log_every=10))
    assert len(tr.steps) == 26
    logged = [r.step for r in tr.steps if r.divergence_estimate is not None]
    assert logged == [0, 10, 20, 25]
    assert all(r.generator_loss is not None for r in tr.steps[1:])


def test_reproducible_bit_identical():
    a = train(cfg(total_generator_steps=30, seed=3))
    b = train(cfg(total_generator_steps=30, seed=3))
    c = train(cfg(total_generator_steps=30, seed=4))
    assert a.same_trajectory(b)
    assert a.to_json() == b.to_json()
    assert not a.same_trajectory(c)


@pytest.mark.parametrize("mode", ["learned", "analytic"])
def test_ns_and_srkl_traces_bit_identical(mode):
    a = train(cfg("js-nonsaturating", critic_mode=mode, total_generator_steps=60, seed=1))
    b = train(cfg("srkl", critic_mode=mode, total_generator_steps=60, seed=1))
    assert a.config_echo["generator_lr"] == b.config_echo["generator_lr"]
    assert [(r.step, r.mu, r.sigma) for r in a.steps] == [(r.step, r.mu, r.sigma) for r in b.steps]
    assert a.final_params == b.final_params


def test_divergence_aborts_with_partial_trace():
    tr = train(cfg("rkl", critic_mode="analytic", generator_lr=1e4, total_generator_steps=50))
    assert tr.status == "diverged"
    assert "left the region" in tr.diagnostic
    assert len(tr.steps) < 51
    assert abs(tr.final_params[0]) > 1e3 or tr.final_params[1] > 1e3


def test_sigma_floor_is_respected():
    tr = train(cfg("rkl", critic_mode="analytic", generator_lr=1.0, total_generator_steps=20, sigma_floor=0.05))
    assert min(r.sigma for r in tr.steps) >= 0.05


@pytest.mark.parametrize("scheme", ["js", "rkl"])
def test_analytic_step_follows_quadrature_gradient(scheme):
    """One large-batch analytic step points along the exact divergence gradient."""
    c = cfg(scheme, critic_mode="analytic", batch_size=2**16, total_generator_steps=1)
    tr = train(c)
    step = -np.subtract(tr.final_params, (c.init_mu, c.init_sigma)) / c.generator_lr
    exact = variational_gradient(c.scheme.minimized_divergence, c.p, c.init_mu, c.init_sigma)
    cos = float(np.dot(step, exact) / (np.linalg.norm(step) * np.linalg.norm(exact)))
    assert cos > 0.99


def test_srkl_estimate_decreases_along_ns_run():
    tr = train(cfg("js-nonsaturating", critic_mode="analytic", total_generator_steps=1500))
    est = tr.arrays()["divergence_estimate"]
    est = est[np.isfinite(est)]
    assert est[-1] < est[0]
    mu, sigma = tr.final_params
    ref = divergence_quadrature(scheme_from_name("srkl").generator_divergence, bimodal_mixture(),
                                gaussian_1d(mu, sigma))
    assert est[-1] == pytest.approx(ref, rel=1e-6)


@pytest.mark.parametrize("scheme", ["rkl", "js-nonsaturating"])
def test_mode_seeking_final_sigma(scheme):
    tr = train(cfg(scheme, critic_mode="analytic"))
    assert tr.status == "ok"
    assert tr.final_params[1] < KL_MOMENT_SIGMA


def test_json_round_trip(tmp_path):
    tr = train(cfg(total_generator_steps=15, log_every=5))
    path = tmp_path / "t.json"
    tr.to_json(path)
    data = json.loads(path.read_text())
    assert data["schema_version"] == 1
    back = TrainTrace.from_dict(data)
    assert back.same_trajectory(tr)
    assert back.config_echo == tr.config_echo
    assert TrainConfig.from_dict(back.config_echo).to_dict() == tr.config_echo


def test_config_from_dict_rejects_unknown_keys():
    with pytest.raises(ValueError):
        TrainConfig.from_dict({"learning_rate": 1.0})
    c = TrainConfig.from_dict({"scheme": "rkl", "critic_mode": "analytic", "seed": 4})
    assert c.scheme.generator_divergence.name == "RKL" and c.generator_lr == 2e-3 and c.seed == 4


def test_csv_output():
    tr = train(cfg(critic_mode="analytic", total_generator_steps=12, log_every=4))
    lines = tr.to_csv().strip().split("\n")
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert len(lines) == 14
    first = lines[1].split(",")
    assert first[:3] == ["0", "1.8", "1.8"] and first[3] == ""
    last = lines[-1].split(",")
    assert float(last[1]) == tr.final_params[0]


def test_metadata_records_open_choices():
    tr = train(cfg(total_generator_steps=1))
    for key in ("critic_init", "batches", "rng", "divergence_estimate"):
        assert key in tr.metadata


def test_run_suite_cardinality():
    base = TrainConfig(total_generator_steps=2, log_every=1)
    traces = run_suite(base)
    assert len(traces) == 16
    combos = {(t.metadata["scheme"], t.config_echo["critic_mode"], t.config_echo["seed"]) for t in traces}
    assert len(combos) == 16
    assert all(t.config_echo["critic_divergence"] == "JS4" for t in traces)
    lrs = {t.metadata["scheme"]: t.config_echo["generator_lr"] for t in traces}
    assert lrs == {"js": 4e-3, "js-nonsaturating": 2e-3, "rkl": 2e-3, "igog": 2e-3}
