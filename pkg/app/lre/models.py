import enum

from pydantic import BaseModel, ConfigDict, Field, field_validator

from app.traces.models import ChannelId


class TaggedCopy(BaseModel):
    seq: int = Field(ge=1)
    channel: ChannelId
    t_tx: int

    model_config = ConfigDict(frozen=True)

    @field_validator("channel")
    @classmethod
    def physical_channel_only(cls, v: ChannelId) -> ChannelId:
        if v is ChannelId.REDUNDANT:
            raise ValueError("Cópias só trafegam nos canais físicos A e B")
        return v


class Verdict(str, enum.Enum):
    DELIVER = "deliver"
    DISCARD = "discard"


class Reception(BaseModel):
    verdict: Verdict
    seq: int
    channel: ChannelId
    t_rx: int
    stale: bool = False

    model_config = ConfigDict(frozen=True)

    @property
    def delivered(self) -> bool:
        return self.verdict is Verdict.DELIVER


class DedupState:
    """Receiver-side bookkeeping of delivered sequence numbers.

    A ring of ``window_capacity`` slots remembers which seq occupied each slot
    last; a seq is a duplicate iff its slot still holds it. Anything at or below
    ``highest_seq - window_capacity`` has left the window and is stale.
    Single owner, not thread-safe.
    """

    def __init__(self, window_capacity: int = 2048):
        if window_capacity < 1:
            raise ValueError("Capacidade da janela deve ser positiva")
        self.window_capacity = window_capacity
        self._slots: list[int] = [0] * window_capacity
        self.highest_seq = 0
        self.delivered = 0
        self.duplicates = 0
        self.stale = 0

    @property
    def floor(self) -> int:
        """Lowest seq still inside the window."""
        return max(1, self.highest_seq - self.window_capacity + 1)

    def is_stale(self, seq: int) -> bool:
        return seq < self.floor

    def seen(self, seq: int) -> bool:
        return self._slots[seq % self.window_capacity] == seq

    def mark(self, seq: int) -> None:
        self._slots[seq % self.window_capacity] = seq
        if seq > self.highest_seq:
            self.highest_seq = seq
