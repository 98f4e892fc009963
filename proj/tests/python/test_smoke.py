"""End-to-end smoke tests for the pybind11 surface."""

import math

import pytest

import finrl_dapo as fd


def test_version():
    assert fd.__version__


def test_score_to_factor_table():
    assert [fd.score_to_factor(s) for s in range(1, 6)] == [0.99, 0.995, 1.0, 1.005, 1.01]
    with pytest.raises(Exception):
        fd.score_to_factor(6)


def test_group_advantage_reference_values():
    adv = fd.group_advantage([1.0, 2.0, 3.0])
    assert adv[1] == pytest.approx(0.0, abs=1e-12)
    assert adv[2] == pytest.approx(1.0 / (math.sqrt(2.0 / 3.0) + 1e-8), rel=1e-12)
    assert fd.group_advantage([2.0, 2.0, 2.0]) == [0.0, 0.0, 0.0]


def test_shape_reward_and_aggregate():
    agg = fd.aggregate_signals([1000.0], [5], [1])
    cfg = fd.RewardConfig()
    cfg.alpha = 1.0
    cfg.beta = 1.0
    assert fd.shape_reward(0.01, agg, cfg) == pytest.approx(0.01 * 1.01 / (0.99 + 1e-8))


def test_clipped_surrogate_term():
    assert fd.clipped_surrogate_term(1.5, 1.0, 0.2, 0.2) == pytest.approx(1.2)
    assert fd.clipped_surrogate_term(0.5, -1.0, 0.2, 0.28) == pytest.approx(-0.8)


def test_metric_fixtures():
    returns = [0.01] * 19 + [-0.08]
    assert fd.cvar(returns, 0.05) == pytest.approx(-0.08)
    r = [0.0] * 36 + [0.05, 0.03, -0.03, -0.01]
    assert fd.rachev_ratio(r, 0.05) == pytest.approx(2.0)
    assert fd.information_ratio([0.02, 0.02, 0.02, 0.0], [0.0] * 4) == pytest.approx(1.5)
    assert fd.max_drawdown([100.0, 110.0, 99.0, 120.0]) == pytest.approx(-0.10)


def _write_market(tmp_path, days=60):
    from datetime import date as _date, timedelta

    prices = ["date,ticker,close"]
    signals = ["date,ticker,sentiment,risk"]
    pa, pb = 100.0, 100.0
    for d in range(days):
        date = (_date(2021, 1, 1) + timedelta(days=d)).isoformat()
        prices.append(f"{date},AAA,{pa:.6f}")
        prices.append(f"{date},BBB,{pb:.6f}")
        sa = 5 if d % 4 < 2 else 1
        signals.append(f"{date},AAA,{sa},{6 - sa}")
        signals.append(f"{date},BBB,{6 - sa},{sa}")
        # High-sentiment asset rallies, the other slips: both see down days.
        pa *= 1.02 if sa == 5 else 0.992
        pb *= 1.02 if sa == 1 else 0.992
    pfile = tmp_path / "prices.csv"
    sfile = tmp_path / "signals.csv"
    pfile.write_text("\n".join(prices) + "\n")
    sfile.write_text("\n".join(signals) + "\n")
    return pfile, sfile


def test_env_roundtrip(tmp_path):
    pfile, sfile = _write_market(tmp_path)
    market, signals = fd.align(fd.parse_prices(str(pfile)), fd.parse_signals(str(sfile)))
    assert market.num_days() == 60
    assert market.tickers == ["AAA", "BBB"]

    cfg = fd.EnvConfig()
    cfg.initial_cash = 1e5
    cfg.transaction_cost_rate = 0.0
    state = fd.env_reset(market, signals, cfg)
    assert state.cash == pytest.approx(1e5)
    out = fd.env_step(state, [0.5, 0.0], market, signals, cfg)
    assert out.next_state.holdings[0] > 0
    group = fd.env_peek_group(state, [[0.1, 0.1], [0.5, 0.0]], market, signals, cfg)
    assert len(group) == 2


def test_policy_sample_and_checkpoint(tmp_path):
    shape = fd.PolicyShape()
    shape.input_dim = 4
    shape.hidden = [8]
    shape.output_dim = 2
    params = fd.init_params(shape, seed=3)
    obs = [0.1, -0.2, 0.5, 1.0]
    a1 = fd.sample_group(params, obs, 4, seed=9)
    a2 = fd.sample_group(params, obs, 4, seed=9)
    assert a1 == a2
    lp = fd.log_prob(params, obs, a1[0])
    assert math.isfinite(lp)
    grad = fd.grad_log_prob(params, obs, a1[0])
    assert len(grad) == shape.param_count()

    pol = fd.Policy()
    pol.params = params
    pol.normalizer = fd.ObsNormalizer(4)
    path = str(tmp_path / "ckpt.bin")
    fd.save_checkpoint(pol, path)
    loaded = fd.load_checkpoint(path)
    assert loaded.params.value == params.value


def test_train_and_backtest_cmd(tmp_path):
    pfile, sfile = _write_market(tmp_path)
    cfg_text = "\n".join(
        [
            f'out = "{tmp_path / "out"}"',
            "seed = 5",
            "[data]",
            f'prices = "{pfile}"',
            f'signals = "{sfile}"',
            'train_end = "2021-02-05"',
            "[env]",
            "initial_cash = 100000.0",
            "transaction_cost_rate = 0.0",
            "hmax = 2000",
            "[optimizer]",
            "epochs = 3",
            "group_size = 4",
            "learning_rate = 0.01",
            "[policy]",
            "hidden = [8, 8]",
            "[eval]",
            'start = "2021-02-06"',
            "",
        ]
    )
    cfg_path = tmp_path / "run.toml"
    cfg_path.write_text(cfg_text)
    cfg = fd.RunConfig.load(str(cfg_path))
    ckpt, log, summary = fd.run_train(cfg)
    report, equity, metrics_json = fd.run_backtest_cmd(cfg, ckpt)
    assert math.isfinite(report.cumulative_return)
    assert report.max_drawdown <= 0.0
    assert (tmp_path / "out" / "metrics.json").exists()
