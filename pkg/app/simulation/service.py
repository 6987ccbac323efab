import logging
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path

import numpy as np

from app.simulation.rng import interferer_labels, substream
from app.simulation.schemas import (
    BurstyPoissonInterferer,
    ChannelConfig,
    ConstantSkew,
    ConstantTail,
    ExponentialTail,
    GilbertElliott,
    Interferer,
    LogNormalTail,
    MulticastService,
    PeriodicInterferer,
    SimConfig,
    TailLaw,
    UnicastService,
)
from app.traces.models import ChannelId, ChannelTrace, Trial

logger = logging.getLogger(__name__)

_CHANNELS = ("A", "B")


def load_config(path: str | Path, seed: int | None = None) -> SimConfig:
    """Read a TOML simulation config; ``seed`` overrides the file's seed."""
    with open(path, "rb") as f:
        data = tomllib.load(f)
    if seed is not None:
        data["seed"] = seed
    return SimConfig.model_validate(data)


# --- Interference events ---


def _event_windows(
    interferer: Interferer, rng: np.random.Generator, horizon_us: int
) -> tuple[np.ndarray, np.ndarray]:
    """Start instants and lengths of the interferer's events over [0, horizon_us]."""
    if isinstance(interferer, PeriodicInterferer):
        count = horizon_us // interferer.period_us + 1
        starts = interferer.phase_us + np.arange(count, dtype=np.int64) * interferer.period_us
        if interferer.jitter_us:
            starts = starts + rng.integers(0, interferer.jitter_us + 1, size=count)
        durations = np.full(count, interferer.duration_us, dtype=np.int64)
        return starts, durations

    assert isinstance(interferer, BurstyPoissonInterferer)
    duration = interferer.burst_duration_us
    cycle = interferer.mean_gap_us + duration
    chunk = int(horizon_us // cycle) + 16
    starts: list[np.ndarray] = []
    cursor = 0.0
    while cursor <= horizon_us:
        gaps = rng.exponential(interferer.mean_gap_us, size=chunk)
        # each burst starts one gap after the previous burst ended
        block = cursor + np.cumsum(gaps) + np.arange(chunk) * duration
        starts.append(block)
        cursor = float(block[-1]) + duration
    all_starts = np.rint(np.concatenate(starts)).astype(np.int64)
    all_starts = all_starts[all_starts <= horizon_us]
    return all_starts, np.full(all_starts.shape[0], duration, dtype=np.int64)


def _hit_counts(tx_us: np.ndarray, starts: np.ndarray, durations: np.ndarray) -> np.ndarray:
    """Per packet, how many events hit it.

    An event hits the packets sent during [start, start + duration); a packet-less
    event (short beacon) hits the next packet sent after it starts.
    """
    n = tx_us.shape[0]
    counts = np.zeros(n + 1, dtype=np.int64)
    if starts.shape[0] == 0 or n == 0:
        return counts[:n]
    order = None
    if n > 1 and not bool(np.all(np.diff(tx_us) >= 0)):
        order = np.argsort(tx_us, kind="stable")
        tx_us = tx_us[order]
    first = np.searchsorted(tx_us, starts, side="left")
    last = np.searchsorted(tx_us, starts + durations, side="left")
    last = np.maximum(last, first + 1)
    valid = first < n
    np.add.at(counts, first[valid], 1)
    np.add.at(counts, np.minimum(last[valid], n), -1)
    hits = np.cumsum(counts)[:n]
    if order is not None:
        unsorted = np.empty_like(hits)
        unsorted[order] = hits
        hits = unsorted
    return hits


def _channel_events(
    interferer: Interferer, seed: int, label: str, horizon_us: int
) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Event windows landing on each channel, after hit and coupling draws."""
    starts, durations = _event_windows(
        interferer, substream(seed, "interferer", label, "times"), horizon_us
    )
    count = starts.shape[0]
    hit = substream(seed, "interferer", label, "hit").random(count) < interferer.effect.hit_prob
    share = substream(seed, "interferer", label, "share").random(count) < interferer.scope.coupling

    scope = interferer.scope.kind
    on_a = hit if scope in ("A", "both") else np.zeros(count, dtype=bool)
    if scope == "B":
        on_b = hit
    elif scope == "both":
        on_b = hit & share
    else:
        on_b = np.zeros(count, dtype=bool)
    return {
        "A": (starts[on_a], durations[on_a]),
        "B": (starts[on_b], durations[on_b]),
    }


def coupled_event_mask(
    interferer: Interferer, seed: int, n: int, period_us: int = 10_000
) -> tuple[np.ndarray, np.ndarray]:
    """Per-packet hit masks (A, B) of one interferer over a nominal periodic stream.

    Every event hits A; with scope ``both`` it also hits B with probability ρ.
    """
    tx = np.arange(n, dtype=np.int64) * period_us
    horizon = int(tx[-1]) if n else 0
    events = _channel_events(interferer, seed, interferer_labels([interferer])[0], horizon)
    return (
        _hit_counts(tx, *events["A"]) > 0,
        _hit_counts(tx, *events["B"]) > 0,
    )


# --- Per-channel outcome draws ---


def _sample_tail(tail: TailLaw, rng: np.random.Generator, n: int) -> np.ndarray:
    if isinstance(tail, ExponentialTail):
        samples = rng.exponential(tail.mean_us, size=n)
    elif isinstance(tail, LogNormalTail):
        samples = rng.lognormal(tail.mu, tail.sigma, size=n)
    else:
        assert isinstance(tail, ConstantTail)
        samples = np.full(n, tail.value_us, dtype=np.float64)
    return np.rint(samples).astype(np.int64)


def gilbert_elliott_states(ge: GilbertElliott, rng: np.random.Generator, n: int) -> np.ndarray:
    """Per-packet burst state (True = bad), started from the stationary law."""
    states = np.empty(n, dtype=bool)
    bad = bool(rng.random() < ge.stationary_bad)
    pos = 0
    while pos < n:
        p_leave = ge.p_bad_to_good if bad else ge.p_good_to_bad
        stay = n - pos if p_leave == 0 else int(rng.geometric(p_leave))
        states[pos : pos + stay] = bad
        pos += stay
        bad = not bad
    return states


def _combine(*probs: np.ndarray | float) -> np.ndarray:
    """Probability that at least one of several independent error sources strikes."""
    survive = 1.0
    for p in probs:
        survive = survive * (1.0 - np.asarray(p, dtype=np.float64))
    return 1.0 - survive


def _channel_outcomes(
    label: str,
    channel: ChannelConfig,
    t_tx: np.ndarray,
    extra_loss: np.ndarray,
    extra_delay: np.ndarray,
    seed: int,
) -> tuple[np.ndarray, np.ndarray]:
    """(lost, latency_us) for every packet on one channel."""
    n = t_tx.shape[0]
    service = channel.service

    ge_error: np.ndarray | float = 0.0
    if channel.gilbert_elliott is not None:
        ge = channel.gilbert_elliott
        bad = gilbert_elliott_states(ge, substream(seed, label, "burst"), n)
        ge_error = np.where(bad, ge.error_prob_bad, ge.error_prob_good)

    loss_rng = substream(seed, label, "loss")
    tail = _sample_tail(service.contention_tail, substream(seed, label, "tail"), n)
    latency = service.base_latency_us + tail + extra_delay

    if isinstance(service, UnicastService):
        p_attempt = _combine(service.per_attempt_error_prob, ge_error, extra_loss)
        p_attempt = np.broadcast_to(p_attempt, (n,))
        attempts_allowed = service.max_retries + 1
        certain = p_attempt >= 1.0
        # attempts until the first success; all allowed attempts failing means loss
        attempts = loss_rng.geometric(np.where(certain, 1.0, 1.0 - p_attempt))
        lost = certain | (attempts > attempts_allowed)
        retries = np.minimum(attempts, attempts_allowed) - 1
        latency = latency + retries * service.retry_latency_us
    else:
        assert isinstance(service, MulticastService)
        p = np.broadcast_to(_combine(service.error_prob, ge_error, extra_loss), (n,))
        lost = loss_rng.random(n) < p
        if service.dtim_buffering:
            interval = service.beacon_interval_us
            latency = latency + (interval - t_tx % interval) % interval

    return lost, latency.astype(np.int64)


def simulate_trial(config: SimConfig) -> Trial:
    """Deterministic function of the config (seed included)."""
    n = config.n_packets
    seed = config.seed

    # Sender clock: A starts at skew_bound_us so an early B copy never precedes the epoch
    t_tx_a = config.skew_bound_us + np.arange(n, dtype=np.int64) * config.period_us
    if config.tx_jitter_us:
        t_tx_a = t_tx_a + substream(seed, "sender", "jitter").integers(
            0, config.tx_jitter_us + 1, size=n
        )
    if isinstance(config.skew, ConstantSkew):
        skew = np.full(n, config.skew.value_us, dtype=np.int64)
    else:
        skew = substream(seed, "sender", "skew").integers(
            config.skew.low_us, config.skew.high_us + 1, size=n
        )
    t_tx = {"A": t_tx_a, "B": t_tx_a + skew}

    for label in _CHANNELS:
        base = config.channel(label).service.base_latency_us
        if base >= config.period_us:
            logger.warning(
                "Canal %s: latência base (%d µs) não menor que o período (%d µs); "
                "pacotes vão enfileirar",
                label,
                base,
                config.period_us,
            )
    horizon = int(max(t_tx["A"][-1], t_tx["B"][-1]))
    trial_end = horizon + config.grace_us

    extra_loss = {label: np.zeros(n) for label in _CHANNELS}
    extra_delay = {label: np.zeros(n, dtype=np.int64) for label in _CHANNELS}
    for interferer, label in zip(config.interferers, interferer_labels(config.interferers)):
        events = _channel_events(interferer, seed, label, horizon)
        effect = interferer.effect
        for channel in _CHANNELS:
            hits = _hit_counts(t_tx[channel], *events[channel])
            if not hits.any():
                continue
            if effect.extra_loss_prob:
                extra_loss[channel] = _combine(
                    extra_loss[channel], 1.0 - (1.0 - effect.extra_loss_prob) ** hits
                )
            extra_delay[channel] += hits * effect.extra_delay_us

    traces = {}
    for label in _CHANNELS:
        lost, latency = _channel_outcomes(
            label, config.channel(label), t_tx[label], extra_loss[label], extra_delay[label], seed
        )
        t_rx = t_tx[label] + latency
        traces[label] = ChannelTrace.from_arrays(
            ChannelId(label),
            t_tx=t_tx[label],
            t_rx=t_rx,
            has_rx=~lost & (t_rx <= trial_end),
            trial_end_us=trial_end,
        )

    logger.info(
        "Trial simulado: N=%d, T_c=%d µs, seed=%d, perdas A=%d B=%d",
        n,
        config.period_us,
        seed,
        traces["A"].n_loss,
        traces["B"].n_loss,
    )
    return Trial(
        period_us=config.period_us,
        n_packets=n,
        trace_a=traces["A"],
        trace_b=traces["B"],
        skew_bound_us=config.skew_bound_us,
        grace_us=config.grace_us,
        tx_jitter_us=config.tx_jitter_us,
        seed=seed,
    )
