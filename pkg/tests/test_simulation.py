import numpy as np
import pytest
from pydantic import ValidationError

from app.metrics.service import autocorrelation, burst_census, deadline_miss_ratio
from app.simulation.presets import (
    INTERFERER_PRESETS,
    PERIOD_10_MS,
    PERIOD_100_MS,
    resolve_interferer,
    trial_size,
)
from app.simulation.rng import interferer_labels, substream
from app.simulation.schemas import (
    BurstyPoissonInterferer,
    GilbertElliott,
    PeriodicInterferer,
    SimConfig,
)
from app.simulation.service import (
    coupled_event_mask,
    gilbert_elliott_states,
    load_config,
    simulate_trial,
)
from app.traces.service import dominance_slack_us, merge_redundant


def _config(**fields) -> SimConfig:
    return SimConfig.model_validate({"period_us": PERIOD_10_MS, **fields})


def test_noiseless_channel(noiseless_config):
    trial = simulate_trial(noiseless_config)
    for trace in (trial.trace_a, trial.trace_b):
        assert trace.n_loss == 0
        assert set(trace.received_latencies_us.tolist()) == {900}


def test_same_seed_same_trial():
    config = _config(preset="independent_multicast", n_packets=2_000, seed=9)
    assert simulate_trial(config) == simulate_trial(config)
    other = config.model_copy(update={"seed": 10})
    assert simulate_trial(other) != simulate_trial(config)


def test_multicast_loss_follows_error_prob():
    n = 100_000
    config = _config(
        n_packets=n,
        channel_a={"service": {"kind": "multicast", "error_prob": 0.01}},
        seed=3,
    )
    trial = simulate_trial(config)
    sigma = np.sqrt(0.01 * 0.99 / n)
    assert abs(trial.trace_a.n_loss / n - 0.01) <= 4 * sigma


def test_unicast_retries_hide_losses():
    config = _config(preset="unicast", n_packets=100_000, seed=5)
    trial = simulate_trial(config)
    assert trial.trace_a.n_loss == 0
    assert trial.trace_b.n_loss == 0
    # retries show up as latency steps of retry_latency_us
    assert trial.trace_a.received_latencies_us.max() >= 500 + 300


def test_transmit_skew_within_bound():
    trial = simulate_trial(_config(preset="independent_multicast", n_packets=5_000, seed=2))
    skew = trial.skew_us
    assert np.abs(skew).max() <= 90
    assert len(np.unique(skew)) > 100


def test_constant_skew():
    trial = simulate_trial(
        _config(n_packets=100, skew={"kind": "constant", "value_us": -40}, seed=1)
    )
    assert set(trial.skew_us.tolist()) == {-40}


def test_skew_law_must_fit_bound():
    with pytest.raises(ValidationError):
        _config(skew={"kind": "uniform", "low_us": -100, "high_us": 100})


def test_period_must_exceed_jitter_and_skew():
    with pytest.raises(ValidationError):
        SimConfig(period_us=150, tx_jitter_us=0)


def test_tx_jitter_applied():
    trial = simulate_trial(_config(n_packets=1_000, tx_jitter_us=400, seed=4))
    offsets = (trial.trace_a.t_tx - trial.trace_a.t_tx[0]) % PERIOD_10_MS
    assert trial.tx_jitter_us == 400
    assert offsets.max() > 0


def test_late_receptions_are_losses():
    config = _config(
        n_packets=50,
        grace_us=0,
        channel_a={
            "service": {
                "kind": "multicast",
                "error_prob": 0.0,
                "base_latency_us": 900,
                "contention_tail": {"kind": "constant", "value_us": 0},
            }
        },
    )
    trial = simulate_trial(config)
    # only the final packet can outlive a zero grace window
    assert trial.trace_a.lost.tolist() == [False] * 49 + [True]


def test_queuing_warning(caplog):
    simulate_trial(
        _config(
            n_packets=10,
            channel_a={"service": {"kind": "multicast", "base_latency_us": 20_000}},
        )
    )
    assert "enfileirar" in caplog.text


def test_dtim_buffering_waits_for_beacon():
    config = _config(
        n_packets=200,
        channel_a={
            "service": {
                "kind": "multicast",
                "error_prob": 0.0,
                "base_latency_us": 0,
                "contention_tail": {"kind": "constant", "value_us": 0},
                "dtim_buffering": True,
            }
        },
    )
    trial = simulate_trial(config)
    t_rx = trial.trace_a.t_rx
    assert np.all(t_rx % 102_400 == 0)
    assert trial.trace_a.received_latencies_us.max() < 102_400


# --- Interferers ---


def test_presets_expand_with_overrides():
    beacon = resolve_interferer({"preset": "beacon", "extra_loss_prob": 0.2})
    assert beacon["period_us"] == 102_400
    assert beacon["extra_loss_prob"] == 0.2
    with pytest.raises(ValueError):
        resolve_interferer({"preset": "microwave"})


def test_lab_preset_profile():
    lab = BurstyPoissonInterferer.model_validate(INTERFERER_PRESETS["lab5ghz"])
    assert lab.burst_packets == 700
    assert lab.scope.kind == "B"


def test_trial_size():
    assert trial_size(PERIOD_100_MS) == 864_000
    assert trial_size(PERIOD_10_MS) == 8_640_000


def test_full_coupling_masks_identical():
    interferer = PeriodicInterferer(period_us=30_000, scope={"kind": "both", "coupling": 1.0})
    mask_a, mask_b = coupled_event_mask(interferer, seed=1, n=10_000)
    assert mask_a.any()
    assert np.array_equal(mask_a, mask_b)


def test_zero_coupling_masks_uncorrelated():
    interferer = PeriodicInterferer(period_us=30_000, scope={"kind": "both", "coupling": 0.0})
    mask_a, mask_b = coupled_event_mask(interferer, seed=1, n=10_000)
    covariance = np.mean(mask_a & mask_b) - np.mean(mask_a) * np.mean(mask_b)
    assert covariance == pytest.approx(0.0, abs=1e-3)


def test_half_coupling_conditional_probability():
    interferer = PeriodicInterferer(period_us=30_000, scope={"kind": "both", "coupling": 0.5})
    mask_a, mask_b = coupled_event_mask(interferer, seed=7, n=1_000_000)
    assert mask_b[mask_a].mean() == pytest.approx(0.5, abs=0.01)


def test_interferer_on_b_leaves_a_untouched():
    base = _config(preset="independent_multicast", n_packets=20_000, seed=11)
    noisy = base.model_copy(
        update={
            "interferers": SimConfig.model_validate(
                {"interferers": [{"preset": "lab5ghz", "mean_gap_us": 100_000}]}
            ).interferers
        }
    )
    quiet_trial, noisy_trial = simulate_trial(base), simulate_trial(noisy)
    assert quiet_trial.trace_a == noisy_trial.trace_a
    assert quiet_trial.trace_b != noisy_trial.trace_b


def test_interferer_labels_follow_content():
    beacon = PeriodicInterferer.model_validate(INTERFERER_PRESETS["beacon"])
    named = PeriodicInterferer(name="scan")
    first = interferer_labels([beacon, named])
    second = interferer_labels([named, beacon])
    assert first == second[::-1]
    assert interferer_labels([beacon, beacon])[0] != interferer_labels([beacon, beacon])[1]


def test_substreams_are_independent_of_order():
    x = substream(5, "A", "loss").random(3)
    substream(5, "B", "loss").random(10)
    assert np.array_equal(x, substream(5, "A", "loss").random(3))


# --- Gilbert-Elliott ---


def test_gilbert_elliott_closed_forms():
    ge = GilbertElliott(
        p_good_to_bad=0.01, p_bad_to_good=0.09, error_prob_good=0.0, error_prob_bad=0.5
    )
    assert ge.stationary_bad == pytest.approx(0.1)
    assert ge.stationary_loss_rate == pytest.approx(0.05)


def test_gilbert_elliott_needs_stationary_law():
    with pytest.raises(ValidationError):
        GilbertElliott(p_good_to_bad=0.0, p_bad_to_good=0.0)


def test_gilbert_elliott_state_occupancy():
    ge = GilbertElliott(p_good_to_bad=0.01, p_bad_to_good=0.1)
    states = gilbert_elliott_states(ge, substream(1, "ge"), 1_000_000)
    assert states.mean() == pytest.approx(ge.stationary_bad, abs=0.006)


def test_gilbert_elliott_makes_bursts():
    config = _config(
        n_packets=200_000,
        seed=8,
        channel_a={
            "service": {"kind": "multicast", "error_prob": 0.0},
            "gilbert_elliott": {
                "p_good_to_bad": 0.002,
                "p_bad_to_good": 0.2,
                "error_prob_good": 0.0,
                "error_prob_bad": 0.8,
            },
        },
    )
    trace = simulate_trial(config).trace_a
    assert burst_census(trace).b_max >= 5
    ac = autocorrelation(trace, 5)
    assert ac.pi_hat[1] > 5


# --- Config files ---


def test_load_config_with_presets(tmp_path):
    path = tmp_path / "trial.toml"
    path.write_text(
        'preset = "coupled_multicast"\n'
        "n_packets = 1000\n"
        "period_us = 10000\n"
        "seed = 4\n"
        "[[interferers]]\n"
        'preset = "beacon"\n'
        "[interferers.scope]\n"
        'kind = "both"\n'
        "coupling = 0.5\n",
        encoding="utf-8",
    )
    config = load_config(path, seed=12)
    assert config.seed == 12
    assert config.channel_a.service.error_prob == 0.01
    assert len(config.interferers) == 1
    assert config.interferers[0].scope.coupling == 0.5


def test_load_config_rejects_unknown_keys(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text("n_pakets = 10\n", encoding="utf-8")
    with pytest.raises(ValidationError):
        load_config(path)


# --- Dominance on many random configurations ---


def _random_config(seed: int) -> SimConfig:
    rng = np.random.default_rng(seed)
    services = [
        {"kind": "multicast", "error_prob": float(rng.uniform(0, 0.05))},
        {"kind": "unicast", "per_attempt_error_prob": float(rng.uniform(0.1, 0.6)),
         "max_retries": int(rng.integers(0, 4))},
    ]
    interferers = [
        {"preset": "beacon"},
        {"preset": "aci", "scope": {"kind": "both", "coupling": float(rng.uniform())}},
        {"preset": "lab5ghz", "mean_gap_us": 200_000},
    ]
    chosen = [i for i in interferers if rng.uniform() < 0.5]
    return SimConfig.model_validate(
        {
            "n_packets": 10_000,
            "period_us": PERIOD_10_MS,
            "seed": seed,
            "channel_a": {"service": services[int(rng.integers(2))]},
            "channel_b": {"service": services[int(rng.integers(2))]},
            "interferers": chosen,
        }
    )


@pytest.mark.parametrize("seed", range(100))
def test_redundant_link_dominates_each_channel(seed):
    trial = simulate_trial(_random_config(seed))
    a, b, ab = trial.trace_a, trial.trace_b, merge_redundant(trial)
    assert np.all(
        ab.latencies_us <= np.minimum(a.latencies_us, b.latencies_us) + dominance_slack_us(trial)
    )
    assert ab.n_loss <= min(a.n_loss, b.n_loss)
    assert burst_census(ab).b_max <= min(burst_census(a).b_max, burst_census(b).b_max)


@pytest.mark.parametrize("seed", range(20))
def test_dmr_dominance_without_skew(seed):
    data = _random_config(seed).model_dump()
    data["skew"] = {"kind": "constant", "value_us": 0}
    trial = simulate_trial(SimConfig.model_validate(data))
    a, b, ab = trial.trace_a, trial.trace_b, merge_redundant(trial)
    assert np.all(ab.latencies_us <= np.minimum(a.latencies_us, b.latencies_us))
    for h in (1_000, 3_000, 10_000, 30_000):
        best = min(deadline_miss_ratio(a, h), deadline_miss_ratio(b, h))
        assert deadline_miss_ratio(ab, h) <= best


# --- Beacon periodicity ---


def _beacon_trial(error_prob: float, with_beacon: bool):
    config = {
        "n_packets": 864_000,
        "period_us": PERIOD_10_MS,
        "seed": 2,
        "channel_a": {"service": {"kind": "multicast", "error_prob": error_prob}},
    }
    if with_beacon:
        config["interferers"] = [{"preset": "beacon"}]
    return simulate_trial(SimConfig.model_validate(config))


@pytest.mark.slow
def test_beacon_shows_in_loss_autocorrelation():
    # 102.4 ms beacons over a 10 ms stream: peaks near lags 10, 20 and 30
    pi = np.array(autocorrelation(_beacon_trial(0.002, True).trace_a, 80).pi_hat)
    for k in (10, 20, 30):
        peak = pi[k - 1 : k + 2].max()
        neighbourhood = np.median(pi[k - 5 : k + 6])
        assert peak >= 2 * neighbourhood


@pytest.mark.slow
def test_iid_losses_have_flat_autocorrelation():
    pi = np.array(autocorrelation(_beacon_trial(0.005, False).trace_a, 80).pi_hat)
    assert 0.8 <= pi[30:71].mean() <= 1.2
