import logging

import numpy as np

from app.traces.models import ChannelId, ChannelTrace, Trial

logger = logging.getLogger(__name__)


class TraceError(ValueError):
    """Base error for malformed or inconsistent traces."""


class MisalignedTraceError(TraceError):
    """Raised when two channel traces do not share the same sequence numbers."""


class EmptyTraceError(TraceError):
    """Raised when an operation needs at least one packet (or one delivered packet)."""


class TraceValidationError(TraceError):
    """Raised when parsed trace data violates a trial invariant."""


class PacketIndexError(TraceError, IndexError):
    """Raised when a packet index falls outside [1, N]."""


def _position(trace: ChannelTrace, i: int) -> int:
    if not 1 <= i <= trace.n:
        raise PacketIndexError(f"Índice de pacote {i} fora do intervalo [1, {trace.n}]")
    return i - 1


def loss_indicator(trace: ChannelTrace, i: int) -> int:
    """l_i: 1 when packet i got no reception before the trial end, 0 otherwise."""
    return int(trace.lost[_position(trace, i)])


def latency(trace: ChannelTrace, i: int) -> int | None:
    """d_i = t_rx − t_tx in µs, or None for a lost packet (∞ downstream)."""
    position = _position(trace, i)
    if trace.lost[position]:
        return None
    return int(trace.t_rx[position] - trace.t_tx[position])


def trial_end_for(t_tx_a: np.ndarray, t_tx_b: np.ndarray, grace_us: int) -> int:
    """Last transmission on either channel plus the reception grace window."""
    if len(t_tx_a) == 0:
        raise EmptyTraceError("Trial sem pacotes")
    return int(max(t_tx_a.max(), t_tx_b.max())) + grace_us


def merge_traces(trace_a: ChannelTrace, trace_b: ChannelTrace) -> ChannelTrace:
    """Redundant-link trace: first copy wins, lost only when lost on both channels."""
    if trace_a.n != trace_b.n or not np.array_equal(trace_a.seq, trace_b.seq):
        raise MisalignedTraceError("Traços desalinhados: sequências de A e B diferem")

    lost_a, lost_b = trace_a.lost, trace_b.lost
    lost_ab = lost_a & lost_b
    # Dropped copies get a sentinel above every real receive time
    sentinel = np.iinfo(np.int64).max
    rx_a = np.where(lost_a, sentinel, trace_a.t_rx)
    rx_b = np.where(lost_b, sentinel, trace_b.t_rx)
    t_rx = np.where(lost_ab, 0, np.minimum(rx_a, rx_b))
    t_tx = np.minimum(trace_a.t_tx, trace_b.t_tx)

    return ChannelTrace.from_arrays(
        ChannelId.REDUNDANT,
        t_tx=t_tx,
        t_rx=t_rx,
        has_rx=~lost_ab,
        trial_end_us=min(trace_a.trial_end_us, trace_b.trial_end_us),
        seq=trace_a.seq,
    )


def merge_redundant(trial: Trial) -> ChannelTrace:
    return merge_traces(trial.trace_a, trial.trace_b)


def dominance_slack_us(trial: Trial) -> np.ndarray:
    """Per-packet amount by which d^AB may exceed min(d^A, d^B).

    The redundant transmit time is the earlier of the two copies, so the
    redundant latency is measured from that instant: the excess is bounded by
    the transmit skew of the packet.
    """
    return np.abs(trial.skew_us)
