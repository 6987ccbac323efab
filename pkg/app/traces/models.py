"""In-memory model of a redundancy trial.

Timestamps are integer microseconds from the trial epoch. A lost copy has no
receive time; storage keeps ``has_rx`` next to a zero-filled ``t_rx`` array so
per-packet arrays stay dense for traces of millions of packets.
"""

import enum
from collections.abc import Iterable, Iterator
from functools import cached_property

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator


class ChannelId(str, enum.Enum):
    A = "A"
    B = "B"
    REDUNDANT = "Redundant"

    @property
    def display(self) -> str:
        """Short label used in tables (the redundant link prints as AB)."""
        return "AB" if self is ChannelId.REDUNDANT else self.value


class PacketRecord(BaseModel):
    seq: int = Field(ge=1)
    t_tx: int
    t_rx: int | None = None

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def _rx_after_tx(self) -> "PacketRecord":
        if self.t_rx is not None and self.t_rx < self.t_tx:
            raise ValueError(
                f"Pacote {self.seq}: recepção ({self.t_rx}) anterior à transmissão ({self.t_tx})"
            )
        return self

    @property
    def delivered(self) -> bool:
        return self.t_rx is not None


def _frozen_int_array(values) -> np.ndarray:
    arr = np.array(values, dtype=np.int64, copy=True).reshape(-1)
    arr.flags.writeable = False
    return arr


class ChannelTrace(BaseModel):
    channel: ChannelId
    seq: np.ndarray
    t_tx: np.ndarray
    t_rx: np.ndarray
    has_rx: np.ndarray
    trial_end_us: int

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    @model_validator(mode="before")
    @classmethod
    def _coerce_arrays(cls, data: dict) -> dict:
        if isinstance(data, dict):
            data = dict(data)
            for key in ("seq", "t_tx", "t_rx"):
                if key in data:
                    data[key] = _frozen_int_array(data[key])
            if "has_rx" in data:
                has_rx = np.array(data["has_rx"], dtype=bool, copy=True).reshape(-1)
                has_rx.flags.writeable = False
                data["has_rx"] = has_rx
        return data

    @model_validator(mode="after")
    def _check_invariants(self) -> "ChannelTrace":
        n = self.seq.shape[0]
        if not (self.t_tx.shape[0] == self.t_rx.shape[0] == self.has_rx.shape[0] == n):
            raise ValueError("Arrays do traço com comprimentos diferentes")
        if n > 1 and not bool(np.all(np.diff(self.seq) > 0)):
            bad = int(np.flatnonzero(np.diff(self.seq) <= 0)[0]) + 2
            raise ValueError(f"Números de sequência não estritamente crescentes (posição {bad})")
        backwards = self.has_rx & (self.t_rx < self.t_tx)
        if bool(backwards.any()):
            seq = int(self.seq[np.flatnonzero(backwards)[0]])
            raise ValueError(f"Pacote {seq}: recepção anterior à transmissão")
        return self

    @classmethod
    def from_records(
        cls, channel: ChannelId, records: Iterable[PacketRecord], trial_end_us: int
    ) -> "ChannelTrace":
        records = list(records)
        return cls(
            channel=channel,
            seq=[r.seq for r in records],
            t_tx=[r.t_tx for r in records],
            t_rx=[r.t_rx if r.t_rx is not None else 0 for r in records],
            has_rx=[r.t_rx is not None for r in records],
            trial_end_us=trial_end_us,
        )

    @classmethod
    def from_arrays(
        cls,
        channel: ChannelId,
        t_tx: np.ndarray,
        t_rx: np.ndarray,
        has_rx: np.ndarray,
        trial_end_us: int,
        seq: np.ndarray | None = None,
    ) -> "ChannelTrace":
        t_rx = np.where(has_rx, t_rx, 0)
        if seq is None:
            seq = np.arange(1, len(t_tx) + 1, dtype=np.int64)
        return cls(
            channel=channel, seq=seq, t_tx=t_tx, t_rx=t_rx, has_rx=has_rx,
            trial_end_us=trial_end_us,
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ChannelTrace):
            return NotImplemented
        return (
            self.channel is other.channel
            and self.trial_end_us == other.trial_end_us
            and all(
                np.array_equal(getattr(self, key), getattr(other, key))
                for key in ("seq", "t_tx", "t_rx", "has_rx")
            )
        )

    __hash__ = None

    def __len__(self) -> int:
        return int(self.seq.shape[0])

    @property
    def n(self) -> int:
        return len(self)

    @cached_property
    def lost(self) -> np.ndarray:
        """Loss indicator l_i: no reception at all, or reception after the trial end."""
        lost = ~self.has_rx | (self.t_rx > self.trial_end_us)
        lost.flags.writeable = False
        return lost

    @cached_property
    def latencies_us(self) -> np.ndarray:
        """Per-packet latency as float, ``inf`` for lost packets."""
        d = (self.t_rx - self.t_tx).astype(np.float64)
        d[self.lost] = np.inf
        d.flags.writeable = False
        return d

    @cached_property
    def received_latencies_us(self) -> np.ndarray:
        """Latencies of delivered packets, in sequence order (int64)."""
        d = (self.t_rx - self.t_tx)[~self.lost]
        d.flags.writeable = False
        return d

    @property
    def n_loss(self) -> int:
        return int(np.count_nonzero(self.lost))

    @property
    def n_rx(self) -> int:
        return self.n - self.n_loss

    def record(self, position: int) -> PacketRecord:
        """Record at 0-based array position, with the stored (raw) receive time."""
        return PacketRecord(
            seq=int(self.seq[position]),
            t_tx=int(self.t_tx[position]),
            t_rx=int(self.t_rx[position]) if self.has_rx[position] else None,
        )

    def records(self) -> Iterator[PacketRecord]:
        for position in range(self.n):
            yield self.record(position)


class Trial(BaseModel):
    period_us: int = Field(gt=0)
    n_packets: int = Field(ge=1)
    trace_a: ChannelTrace
    trace_b: ChannelTrace
    skew_bound_us: int = Field(default=90, ge=0)
    grace_us: int = Field(default=5_000_000, ge=0)
    tx_jitter_us: int | None = Field(default=None, ge=0)
    seed: int | None = None

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    @model_validator(mode="after")
    def _check_alignment(self) -> "Trial":
        if self.trace_a.channel is not ChannelId.A or self.trace_b.channel is not ChannelId.B:
            raise ValueError("Um trial exige os traços dos canais A e B")
        if self.trace_a.n != self.n_packets or self.trace_b.n != self.n_packets:
            raise ValueError(
                f"Traços com {self.trace_a.n}/{self.trace_b.n} pacotes, esperado {self.n_packets}"
            )
        if not np.array_equal(self.trace_a.seq, self.trace_b.seq):
            raise ValueError("Números de sequência de A e B não estão alinhados")
        if self.trace_a.trial_end_us != self.trace_b.trial_end_us:
            raise ValueError("Fim de trial divergente entre os canais")
        skew = np.abs(self.trace_a.t_tx - self.trace_b.t_tx)
        if self.n_packets and int(skew.max()) > self.skew_bound_us:
            i = int(np.argmax(skew))
            raise ValueError(
                f"Pacote {int(self.trace_a.seq[i])}: defasagem de transmissão {int(skew[i])} µs "
                f"excede o limite de {self.skew_bound_us} µs"
            )
        if self.tx_jitter_us is not None:
            expected = (self.trace_a.seq - self.trace_a.seq[0]) * self.period_us
            deviation = np.abs(self.trace_a.t_tx - self.trace_a.t_tx[0] - expected)
            if int(deviation.max()) > self.tx_jitter_us:
                raise ValueError(
                    f"Transmissões fora do período: desvio de {int(deviation.max())} µs "
                    f"acima do jitter {self.tx_jitter_us} µs"
                )
        return self

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Trial):
            return NotImplemented
        scalars = ("period_us", "n_packets", "skew_bound_us", "grace_us", "tx_jitter_us", "seed")
        return (
            all(getattr(self, key) == getattr(other, key) for key in scalars)
            and self.trace_a == other.trace_a
            and self.trace_b == other.trace_b
        )

    __hash__ = None

    @property
    def trial_end_us(self) -> int:
        return self.trace_a.trial_end_us

    @property
    def skew_us(self) -> np.ndarray:
        """Signed per-packet transmit skew t_tx^B − t_tx^A."""
        return self.trace_b.t_tx - self.trace_a.t_tx
