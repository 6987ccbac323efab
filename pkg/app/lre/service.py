"""Link Redundancy Entity: duplication on the sender, first-copy-wins on the receiver."""

import logging
from collections.abc import Iterable, Sequence

import numpy as np

from app.config import settings
from app.lre.models import DedupState, Reception, TaggedCopy, Verdict
from app.traces.models import ChannelId, ChannelTrace, Trial

logger = logging.getLogger(__name__)

# A before B when two copies arrive at the same instant
_CHANNEL_ORDER = {ChannelId.A: 0, ChannelId.B: 1}


class SkewBoundError(ValueError):
    """Raised when the requested transmit skew exceeds the configured bound."""


class UnsortedEventsError(ValueError):
    """Raised when the arrival stream is not ordered by (t_rx, channel)."""


def duplicate(
    seq: int, t_request: int, skew: int, bound_us: int | None = None
) -> tuple[TaggedCopy, TaggedCopy]:
    """Emit the A and B copies of one packet, sharing ``seq``.

    Positive skew delays the B copy, negative skew delays the A copy.
    """
    bound_us = settings.skew_bound_us if bound_us is None else bound_us
    if abs(skew) > bound_us:
        raise SkewBoundError(f"Defasagem {skew} µs excede o limite de {bound_us} µs")
    copy_a = TaggedCopy(seq=seq, channel=ChannelId.A, t_tx=t_request + max(0, -skew))
    copy_b = TaggedCopy(seq=seq, channel=ChannelId.B, t_tx=t_request + max(0, skew))
    return copy_a, copy_b


def on_receive(state: DedupState, copy: TaggedCopy, t_rx: int) -> Reception:
    if t_rx < copy.t_tx:
        raise ValueError(f"Cópia {copy.seq}/{copy.channel.value}: recepção antes da transmissão")

    if state.is_stale(copy.seq):
        state.stale += 1
        return Reception(
            verdict=Verdict.DISCARD, seq=copy.seq, channel=copy.channel, t_rx=t_rx, stale=True
        )
    if state.seen(copy.seq):
        state.duplicates += 1
        return Reception(verdict=Verdict.DISCARD, seq=copy.seq, channel=copy.channel, t_rx=t_rx)

    state.mark(copy.seq)
    state.delivered += 1
    return Reception(verdict=Verdict.DELIVER, seq=copy.seq, channel=copy.channel, t_rx=t_rx)


def _event_key(event: tuple[TaggedCopy, int]) -> tuple[int, int]:
    copy, t_rx = event
    return t_rx, _CHANNEL_ORDER[copy.channel]


def run_trial(
    events: Iterable[tuple[TaggedCopy, int]],
    sent: Sequence[tuple[TaggedCopy, TaggedCopy]],
    trial_end_us: int,
    window_capacity: int | None = None,
) -> ChannelTrace:
    """Drive one receiver over an arrival stream and return the redundant-link trace.

    ``sent`` is the sender log (one copy pair per packet, in seq order); it
    provides N and the transmit instants of packets that never arrive.
    Arrivals after ``trial_end_us`` are ignored like any late copy.
    """
    state = DedupState(window_capacity or settings.window_capacity)
    n = len(sent)
    seqs = np.fromiter((pair[0].seq for pair in sent), dtype=np.int64, count=n)
    t_tx = np.fromiter(
        (min(pair[0].t_tx, pair[1].t_tx) for pair in sent), dtype=np.int64, count=n
    )
    position = {int(s): p for p, s in enumerate(seqs)}
    t_rx = np.zeros(n, dtype=np.int64)
    has_rx = np.zeros(n, dtype=bool)

    previous: tuple[int, int] | None = None
    for event in events:
        key = _event_key(event)
        if previous is not None and key < previous:
            raise UnsortedEventsError(
                f"Eventos fora de ordem: t_rx={key[0]} após t_rx={previous[0]}"
            )
        previous = key
        copy, arrival = event
        if arrival > trial_end_us:
            continue
        if copy.seq not in position:
            raise ValueError(f"Cópia com seq {copy.seq} ausente do registro de envio")
        reception = on_receive(state, copy, arrival)
        if reception.delivered:
            p = position[copy.seq]
            t_rx[p] = arrival
            has_rx[p] = True

    if state.stale:
        logger.warning(
            "LRE descartou %d cópias fora da janela (capacidade %d)",
            state.stale,
            state.window_capacity,
        )
    logger.debug(
        "LRE: %d entregues, %d duplicatas descartadas", state.delivered, state.duplicates
    )
    return ChannelTrace.from_arrays(
        ChannelId.REDUNDANT, t_tx=t_tx, t_rx=t_rx, has_rx=has_rx,
        trial_end_us=trial_end_us, seq=seqs,
    )


def trial_events(
    trial: Trial,
) -> tuple[list[tuple[TaggedCopy, int]], list[tuple[TaggedCopy, TaggedCopy]]]:
    """Sender log and arrival stream of a trial, sorted by (t_rx, A before B, seq)."""
    a, b = trial.trace_a, trial.trace_b
    sent = [
        (
            TaggedCopy(seq=int(s), channel=ChannelId.A, t_tx=int(ta)),
            TaggedCopy(seq=int(s), channel=ChannelId.B, t_tx=int(tb)),
        )
        for s, ta, tb in zip(a.seq, a.t_tx, b.t_tx)
    ]
    events: list[tuple[TaggedCopy, int]] = []
    for index, trace in enumerate((a, b)):
        for p in np.flatnonzero(trace.has_rx):
            events.append((sent[p][index], int(trace.t_rx[p])))
    events.sort(key=lambda e: (e[1], _CHANNEL_ORDER[e[0].channel], e[0].seq))
    return events, sent
