"""Single-trace statistics: loss ratio, latency summary, deadline miss ratio,
latency CCDF, loss autocorrelation and burst census.

Latency statistics cover delivered packets only; lost packets enter the
deadline miss ratio as misses at every threshold.
"""

import logging
import math
from collections.abc import Iterable
from fractions import Fraction

import numpy as np

from app.config import settings
from app.metrics.schemas import (
    BurstCensus,
    ECcdf,
    LatencySummary,
    LossAutocorrelation,
    MetricsReport,
)
from app.traces.models import ChannelTrace
from app.traces.service import EmptyTraceError

logger = logging.getLogger(__name__)


class UndefinedMetricError(ValueError):
    """Raised when a statistic has no meaning for the given trace."""


def _require_packets(trace: ChannelTrace) -> None:
    if trace.n == 0:
        raise EmptyTraceError("Traço vazio")


def _require_received(trace: ChannelTrace) -> None:
    _require_packets(trace)
    if trace.n_rx == 0:
        raise UndefinedMetricError(
            f"Canal {trace.channel.display}: nenhum pacote recebido, latência indefinida"
        )


def loss_ratio(trace: ChannelTrace) -> float:
    """Υ_L = N_L / N."""
    _require_packets(trace)
    return trace.n_loss / trace.n


def nearest_rank(sorted_values: np.ndarray, p: float) -> int:
    """Order statistic of rank ⌈p·n⌉ (1-based) of an ascending array."""
    n = sorted_values.shape[0]
    rank = max(1, math.ceil(Fraction(str(p)) * n))
    return int(sorted_values[min(rank, n) - 1])


def latency_summary(trace: ChannelTrace, percentile: float | None = None) -> LatencySummary:
    _require_received(trace)
    percentile = settings.percentile if percentile is None else percentile
    d = np.sort(trace.received_latencies_us)
    std = float(np.std(d, ddof=1)) if d.shape[0] > 1 else 0.0
    return LatencySummary(
        mean_us=float(np.mean(d)),
        std_us=std,
        p9999_us=nearest_rank(d, percentile),
        max_us=int(d[-1]),
    )


def deadline_miss_ratio(trace: ChannelTrace, h_us: float) -> float:
    """Υ_{d>H} = (N_L + N_{R|d>H}) / N, strict inequality."""
    _require_packets(trace)
    late = int(np.count_nonzero(trace.received_latencies_us > h_us))
    return (trace.n_loss + late) / trace.n


def dmr_from_ccdf(loss: float, ccdf: ECcdf, h_us: float) -> float:
    """Υ_L + (1 − Υ_L)·F̄(H): the same deadline miss ratio written through the CCDF."""
    return loss + (1.0 - loss) * ccdf.evaluate(h_us)


def eccdf(trace: ChannelTrace) -> ECcdf:
    _require_received(trace)
    values, counts = np.unique(trace.received_latencies_us, return_counts=True)
    n_rx = trace.n_rx
    above = n_rx - np.cumsum(counts)
    return ECcdf(breakpoints_us=values, values=above / n_rx)


_UNITS_US = {"us": 1, "ms": 1_000, "s": 1_000_000}


def parse_deadlines(text: str) -> list[int]:
    """``"1,3,10,30ms"`` → ``[1000, 3000, 10000, 30000]``.

    A unit on an item applies to that item; a unit on the last item also applies
    to every bare item. Bare lists are in milliseconds.
    """
    items = [item.strip() for item in text.split(",") if item.strip()]
    if not items:
        raise ValueError("Lista de prazos vazia")

    def split_unit(item: str) -> tuple[str, str | None]:
        for unit in ("us", "ms", "s"):
            if item.endswith(unit):
                return item[: -len(unit)].strip(), unit
        return item, None

    default_unit = split_unit(items[-1])[1] or "ms"
    deadlines = []
    for item in items:
        number, unit = split_unit(item)
        try:
            value = float(number) * _UNITS_US[unit or default_unit]
        except ValueError:
            raise ValueError(f"Prazo inválido: {item!r}") from None
        if value < 0 or value != int(value):
            raise ValueError(f"Prazo deve ser um número inteiro não negativo de µs: {item!r}")
        deadlines.append(int(value))
    return deadlines


def default_max_lag(n: int) -> int:
    return min(settings.max_lag_cap, n // 10)


def _lagged_products(lost: np.ndarray, max_lag: int) -> np.ndarray:
    """Σ_{i<N−K} l_i·l_{i+k} for k = 0..K, exact integer counts."""
    n = lost.shape[0]
    m = n - max_lag
    if not lost.any():
        return np.zeros(max_lag + 1, dtype=np.int64)
    size = 1 << max(1, (n - 1).bit_length())
    head = np.fft.rfft(lost[:m].astype(np.float64), size)
    full = np.fft.rfft(lost.astype(np.float64), size)
    corr = np.fft.irfft(np.conj(head) * full, size)[: max_lag + 1]
    return np.rint(corr).astype(np.int64)


def autocorrelation(trace: ChannelTrace, max_lag: int | None = None) -> LossAutocorrelation:
    """R̂(k) with the fixed N−K denominator, and π̂(k) = R̂(k)/Υ_L² when Υ_L > 0."""
    _require_packets(trace)
    n = trace.n
    max_lag = default_max_lag(n) if max_lag is None else max_lag
    if max_lag < 0 or max_lag >= n:
        raise UndefinedMetricError(f"Atraso máximo K={max_lag} exige 0 ≤ K < N={n}")

    counts = _lagged_products(trace.lost, max_lag)
    r_hat = counts / (n - max_lag)
    ratio = trace.n_loss / n
    pi_hat = (r_hat / ratio**2).tolist() if ratio > 0 else None
    return LossAutocorrelation(
        n=n, max_lag=max_lag, loss_ratio=ratio, r_hat=r_hat.tolist(), pi_hat=pi_hat
    )


def burst_census(trace: ChannelTrace) -> BurstCensus:
    """Maximal runs of consecutive losses, including runs touching either end."""
    padded = np.concatenate(([0], trace.lost.astype(np.int8), [0]))
    edges = np.diff(padded)
    lengths = np.flatnonzero(edges == -1) - np.flatnonzero(edges == 1)
    if lengths.shape[0] == 0:
        return BurstCensus(histogram={}, b_max=0, n_loss=0)
    counts = np.bincount(lengths)
    histogram = {int(b): int(c) for b, c in enumerate(counts) if b > 0 and c > 0}
    return BurstCensus(histogram=histogram, b_max=int(lengths.max()), n_loss=trace.n_loss)


def compute_metrics(
    trace: ChannelTrace,
    deadlines_us: Iterable[int] | None = None,
    max_lag: int | None = None,
) -> MetricsReport:
    """Every index for one channel; latency fields stay empty when nothing arrived."""
    _require_packets(trace)
    deadlines_us = settings.deadlines_us if deadlines_us is None else list(deadlines_us)

    summary = latency_summary(trace) if trace.n_rx else None
    if summary is None:
        logger.warning("Canal %s: nenhum pacote recebido", trace.channel.display)

    autocorr = None
    lag = default_max_lag(trace.n) if max_lag is None else max_lag
    if lag < trace.n:
        autocorr = autocorrelation(trace, lag)

    return MetricsReport(
        channel=trace.channel,
        n=trace.n,
        n_rx=trace.n_rx,
        n_loss=trace.n_loss,
        loss_ratio=loss_ratio(trace),
        mean_us=summary.mean_us if summary else None,
        std_us=summary.std_us if summary else None,
        p9999_us=summary.p9999_us if summary else None,
        max_us=summary.max_us if summary else None,
        dmr={h: deadline_miss_ratio(trace, h) for h in deadlines_us},
        ccdf=eccdf(trace) if trace.n_rx else None,
        autocorr=autocorr,
        bursts=burst_census(trace),
    )
