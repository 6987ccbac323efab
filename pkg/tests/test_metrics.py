import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings

import oracles
from app.metrics.schemas import BurstCensus, ECcdf, MetricsReport
from app.metrics.service import (
    UndefinedMetricError,
    autocorrelation,
    burst_census,
    compute_metrics,
    deadline_miss_ratio,
    default_max_lag,
    dmr_from_ccdf,
    eccdf,
    latency_summary,
    loss_ratio,
    parse_deadlines,
)
from app.traces.models import ChannelId, ChannelTrace
from app.traces.service import EmptyTraceError, merge_redundant
from strategies import trials


def _trace_with_latencies(latencies_us, lost=()):
    pairs = []
    for i, d in enumerate(latencies_us):
        tx = i * 100_000
        pairs.append((tx, None if i in lost else tx + d))
    return oracles.trace_from_pairs(ChannelId.A, pairs, trial_end_us=10**9)


def _trace_from_mask(lost: np.ndarray) -> ChannelTrace:
    n = lost.shape[0]
    t_tx = np.arange(n, dtype=np.int64) * 10_000
    return ChannelTrace.from_arrays(
        ChannelId.A, t_tx=t_tx, t_rx=t_tx + 900, has_rx=~lost,
        trial_end_us=int(t_tx[-1]) + 5_000_000,
    )


# --- Loss ratio ---


def test_loss_ratio_lossless_day():
    assert loss_ratio(_trace_from_mask(np.zeros(864_000, dtype=bool))) == 0.0


def test_loss_ratio_total_outage():
    assert loss_ratio(_trace_with_latencies([900] * 4, lost={0, 1, 2, 3})) == 1.0


def test_loss_ratio_table_counts():
    # 4399 and 9547 losses over a day at 100 ms
    lost_a = np.zeros(864_000, dtype=bool)
    lost_a[::196][:4_399] = True
    lost_b = np.zeros(864_000, dtype=bool)
    lost_b[::90][:9_547] = True
    assert f"{loss_ratio(_trace_from_mask(lost_a)) * 1000:.3f}" == "5.091"
    assert f"{loss_ratio(_trace_from_mask(lost_b)) * 1000:.2f}" == "11.05"


def test_empty_trace_rejected():
    empty = ChannelTrace(channel=ChannelId.A, seq=[], t_tx=[], t_rx=[], has_rx=[], trial_end_us=0)
    with pytest.raises(EmptyTraceError):
        loss_ratio(empty)


# --- Latency summary ---


def test_summary_constant_latency():
    s = latency_summary(_trace_with_latencies([900] * 5))
    assert (s.mean_us, s.std_us, s.p9999_us, s.max_us) == (900.0, 0.0, 900, 900)


def test_summary_nearest_rank():
    s = latency_summary(_trace_with_latencies([1_000, 2_000, 3_000, 4_000]))
    assert s.mean_us == 2_500.0
    assert s.max_us == 4_000
    assert s.p9999_us == 4_000


def test_summary_unbiased_std():
    s = latency_summary(_trace_with_latencies([1_000, 3_000]))
    assert s.std_us == pytest.approx(math.sqrt(2) * 1_000)


def test_summary_single_packet_has_zero_std():
    s = latency_summary(_trace_with_latencies([1_234]))
    assert s.std_us == 0.0


def test_summary_needs_a_delivery():
    with pytest.raises(UndefinedMetricError):
        latency_summary(_trace_with_latencies([900, 900], lost={0, 1}))


# --- Deadline miss ratio and CCDF ---


def test_dmr_no_misses():
    assert deadline_miss_ratio(_trace_with_latencies([900] * 3), 1_000) == 0.0


def test_dmr_all_lost():
    trace = _trace_with_latencies([900] * 3, lost={0, 1, 2})
    assert all(deadline_miss_ratio(trace, h) == 1.0 for h in (0, 1_000, 30_000))


def test_dmr_hand_example():
    latencies = [1_000 * k for k in range(1, 10)] + [0]
    trace = _trace_with_latencies(latencies, lost={9})
    assert deadline_miss_ratio(trace, 3_000) == pytest.approx(0.7)


def test_dmr_is_strict():
    trace = _trace_with_latencies([3_000])
    assert deadline_miss_ratio(trace, 3_000) == 0.0
    assert deadline_miss_ratio(trace, 2_999) == 1.0


def test_eccdf_three_points():
    f = eccdf(_trace_with_latencies([1_000, 2_000, 3_000]))
    assert f.breakpoints_us.tolist() == [1_000, 2_000, 3_000]
    assert f.evaluate(0) == 1.0
    assert f.evaluate(1_000) == pytest.approx(2 / 3)
    assert f.evaluate(3_000) == 0.0
    # right-continuous: between breakpoints the value of the lower one holds
    assert f.evaluate(1_500) == f.evaluate(1_000)
    assert f.evaluate_left(1_000) == 1.0


def test_eccdf_rejects_bad_step_function():
    with pytest.raises(ValueError):
        ECcdf(breakpoints_us=[], values=[])
    with pytest.raises(ValueError):
        ECcdf(breakpoints_us=[1, 2], values=[0.2, 0.5])
    with pytest.raises(ValueError):
        ECcdf(breakpoints_us=[2, 1], values=[0.5, 0.0])


def test_eccdf_evaluates_arrays():
    f = ECcdf(breakpoints_us=[10, 20], values=[0.5, 0.0])
    assert f.evaluate(np.array([5, 10, 15, 25])).tolist() == [1.0, 0.5, 0.5, 0.0]


# --- Autocorrelation ---


def test_autocorrelation_no_losses():
    ac = autocorrelation(_trace_from_mask(np.zeros(50, dtype=bool)), 5)
    assert ac.r_hat == [0.0] * 6
    assert ac.pi_hat is None
    assert not ac.normalized


def test_autocorrelation_alternating():
    lost = np.array([1, 0] * 5, dtype=bool)
    ac = autocorrelation(_trace_from_mask(lost), 2)
    assert ac.r_hat == [0.5, 0.0, 0.5]
    assert ac.pi_hat == [2.0, 0.0, 2.0]


def test_autocorrelation_lag_must_be_below_n():
    with pytest.raises(UndefinedMetricError):
        autocorrelation(_trace_from_mask(np.zeros(5, dtype=bool)), 5)


def test_default_max_lag():
    assert default_max_lag(100) == 10
    assert default_max_lag(864_000) == 1_000


def test_autocorrelation_iid_is_flat():
    rng = np.random.default_rng(11)
    lost = rng.random(200_000) < 0.05
    ac = autocorrelation(_trace_from_mask(lost), 20)
    assert ac.pi_hat[0] == pytest.approx(1 / ac.loss_ratio, rel=0.01)
    assert np.mean(ac.pi_hat[1:]) == pytest.approx(1.0, abs=0.05)


# --- Burst census ---


def test_bursts_hand_example():
    census = burst_census(_trace_from_mask(np.array([0, 1, 1, 0, 1], dtype=bool)))
    assert census.histogram == {1: 1, 2: 1}
    assert census.b_max == 2


def test_bursts_none():
    census = burst_census(_trace_from_mask(np.zeros(10, dtype=bool)))
    assert census.histogram == {}
    assert census.b_max == 0


def test_bursts_table_row():
    # 5961 single losses, 33 pairs and one triple
    n = 600_000
    lost = np.zeros(n, dtype=bool)
    starts = np.arange(5_995) * 100
    lengths = np.array([1] * 5_961 + [2] * 33 + [3])
    for start, length in zip(starts, lengths):
        lost[start : start + length] = True
    census = burst_census(_trace_from_mask(lost))
    assert census.table_row() == (5_961, 33, 1, 0, 0, 3)


def test_burst_census_mass_check():
    with pytest.raises(ValueError):
        BurstCensus(histogram={1: 2}, b_max=1, n_loss=3)


@pytest.mark.parametrize("n", range(1, 13))
def test_autocorrelation_and_bursts_exhaustive(n):
    for pattern in itertools.product([0, 1], repeat=n):
        lost = list(pattern)
        trace = _trace_from_mask(np.array(lost, dtype=bool))
        for k in sorted({0, 1 % n, n // 2, n - 1}):
            assert autocorrelation(trace, k).r_hat == oracles.autocorrelation(lost, k)
        census = burst_census(trace)
        assert census.histogram == oracles.bursts(lost)
        assert census.b_max == max(oracles.bursts(lost), default=0)


# --- Whole-report oracle checks ---


def _check_against_oracle(trace: ChannelTrace):
    pairs = oracles.pairs_of(trace)
    end = trace.trial_end_us
    assert loss_ratio(trace) == oracles.loss_ratio(pairs, end)
    for h in (0, 999, 1_000, 3_000, 30_000):
        assert deadline_miss_ratio(trace, h) == oracles.deadline_miss_ratio(pairs, end, h)
    lost = oracles.lost_flags(pairs, end)
    assert burst_census(trace).histogram == oracles.bursts(lost)
    k = default_max_lag(trace.n)
    assert autocorrelation(trace, k).r_hat == oracles.autocorrelation(lost, k)
    if trace.n_rx:
        mean, std, p, mx = oracles.latency_summary(pairs, end)
        s = latency_summary(trace)
        assert (s.mean_us, s.p9999_us, s.max_us) == (mean, p, mx)
        assert s.std_us == pytest.approx(std, rel=1e-12, abs=1e-9)
        f = eccdf(trace)
        points = oracles.eccdf_points(pairs, end)
        assert f.breakpoints_us.tolist() == [h for h, _ in points]
        assert f.values.tolist() == [v for _, v in points]


@settings(max_examples=300, deadline=None)
@given(trials())
def test_metrics_match_oracle(trial):
    for trace in (trial.trace_a, trial.trace_b, merge_redundant(trial)):
        _check_against_oracle(trace)


@settings(max_examples=200, deadline=None)
@given(trials())
def test_dmr_through_ccdf_identity(trial):
    trace = trial.trace_a
    if not trace.n_rx:
        return
    f = eccdf(trace)
    loss = loss_ratio(trace)
    for h in (0, 500, 1_000, 3_000, 30_000, 50_000):
        assert dmr_from_ccdf(loss, f, h) == pytest.approx(deadline_miss_ratio(trace, h))


@settings(max_examples=100, deadline=None)
@given(trials())
def test_dmr_monotone_in_deadline(trial):
    trace = trial.trace_b
    values = [deadline_miss_ratio(trace, h) for h in (0, 500, 1_000, 3_000, 30_000, 10**9)]
    assert values == sorted(values, reverse=True)
    assert values[-1] == loss_ratio(trace)


def test_compute_metrics_report(five_packet_trial):
    report = compute_metrics(five_packet_trial.trace_a, deadlines_us=[1_000], max_lag=2)
    assert (report.n, report.n_rx, report.n_loss) == (5, 3, 2)
    assert report.loss_ratio == 0.4
    assert report.dmr == {1_000: 0.4}
    assert report.bursts.histogram == {2: 1}
    assert report.autocorr.max_lag == 2
    assert MetricsReport.model_validate_json(report.model_dump_json()) == report


def test_compute_metrics_without_deliveries(caplog):
    trace = _trace_with_latencies([900, 900], lost={0, 1})
    report = compute_metrics(trace, deadlines_us=[1_000])
    assert report.mean_us is None
    assert report.ccdf is None
    assert report.dmr == {1_000: 1.0}
    assert "nenhum pacote recebido" in caplog.text


def test_parse_deadlines():
    assert parse_deadlines("1,3,10,30ms") == [1_000, 3_000, 10_000, 30_000]
    assert parse_deadlines("500us,2") == [500, 2_000]
    assert parse_deadlines("1.5ms") == [1_500]
    with pytest.raises(ValueError):
        parse_deadlines("abc")
    with pytest.raises(ValueError):
        parse_deadlines("")
