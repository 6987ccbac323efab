from typing import Annotated

import numpy as np
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    WithJsonSchema,
    field_serializer,
    model_validator,
)

from app.traces.models import ChannelId


class ECcdf(BaseModel):
    """Right-continuous step function F̄(h) = P(D > h).

    ``values[j]`` holds on [breakpoints_us[j], breakpoints_us[j+1]); below the
    first breakpoint the function is 1.
    """

    breakpoints_us: Annotated[
        np.ndarray, WithJsonSchema({"type": "array", "items": {"type": "integer"}})
    ]
    values: Annotated[np.ndarray, WithJsonSchema({"type": "array", "items": {"type": "number"}})]

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    @model_validator(mode="before")
    @classmethod
    def _coerce(cls, data):
        if isinstance(data, dict):
            data = dict(data)
            bp = np.array(data.get("breakpoints_us", []), dtype=np.int64).reshape(-1)
            values = np.array(data.get("values", []), dtype=np.float64).reshape(-1)
            bp.flags.writeable = False
            values.flags.writeable = False
            data["breakpoints_us"], data["values"] = bp, values
        return data

    @model_validator(mode="after")
    def _valid_step_function(self) -> "ECcdf":
        if self.breakpoints_us.shape[0] == 0:
            raise ValueError("CCDF vazia")
        if self.breakpoints_us.shape != self.values.shape:
            raise ValueError("CCDF com pontos de quebra e valores de tamanhos diferentes")
        if np.any(np.diff(self.breakpoints_us) <= 0):
            raise ValueError("Pontos de quebra da CCDF devem ser estritamente crescentes")
        if np.any(self.values < -1e-12) or np.any(self.values > 1 + 1e-12):
            raise ValueError("Valores da CCDF fora de [0, 1]")
        if np.any(np.diff(self.values) > 1e-12):
            raise ValueError("CCDF deve ser não crescente")
        return self

    @field_serializer("breakpoints_us")
    def _ser_breakpoints(self, v: np.ndarray) -> list[int]:
        return v.tolist()

    @field_serializer("values")
    def _ser_values(self, v: np.ndarray) -> list[float]:
        return v.tolist()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ECcdf):
            return NotImplemented
        return np.array_equal(self.breakpoints_us, other.breakpoints_us) and np.array_equal(
            self.values, other.values
        )

    __hash__ = None

    def __len__(self) -> int:
        return int(self.breakpoints_us.shape[0])

    def evaluate(self, h):
        """F̄(h); accepts a scalar or an array of µs values."""
        idx = np.searchsorted(self.breakpoints_us, h, side="right") - 1
        out = np.where(idx < 0, 1.0, self.values[np.maximum(idx, 0)])
        return float(out) if np.ndim(out) == 0 else out

    def evaluate_left(self, h):
        """Left limit F̄(h⁻), the value just before a jump at h."""
        idx = np.searchsorted(self.breakpoints_us, h, side="left") - 1
        out = np.where(idx < 0, 1.0, self.values[np.maximum(idx, 0)])
        return float(out) if np.ndim(out) == 0 else out


class LatencySummary(BaseModel):
    mean_us: float
    std_us: float
    p9999_us: int
    max_us: int


class BurstCensus(BaseModel):
    histogram: dict[int, int] = {}
    b_max: int = 0
    n_loss: int = 0

    @model_validator(mode="after")
    def _mass_conserved(self) -> "BurstCensus":
        if sum(length * count for length, count in self.histogram.items()) != self.n_loss:
            raise ValueError("Censo de rajadas não conserva o número de perdas")
        if self.histogram and max(self.histogram) != self.b_max:
            raise ValueError("b_max não corresponde à maior rajada")
        return self

    def count(self, length: int) -> int:
        return self.histogram.get(length, 0)

    def count_at_least(self, length: int) -> int:
        return sum(c for b, c in self.histogram.items() if b >= length)

    def table_row(self) -> tuple[int, int, int, int, int, int]:
        """(N_B=1, N_B=2, N_B=3, N_B=4, N_B≥5, B_max)."""
        return (
            self.count(1), self.count(2), self.count(3), self.count(4),
            self.count_at_least(5), self.b_max,
        )


class LossAutocorrelation(BaseModel):
    n: int
    max_lag: int
    loss_ratio: float
    r_hat: list[float]
    # None when the loss ratio is zero: normalization undefined
    pi_hat: list[float] | None = None

    @property
    def normalized(self) -> bool:
        return self.pi_hat is not None


class MetricsReport(BaseModel):
    channel: ChannelId
    n: int = Field(ge=1)
    n_rx: int = Field(ge=0)
    n_loss: int = Field(ge=0)
    loss_ratio: float = Field(ge=0.0, le=1.0)
    mean_us: float | None = None
    std_us: float | None = None
    p9999_us: int | None = None
    max_us: int | None = None
    dmr: dict[int, float] = {}
    ccdf: ECcdf | None = None
    autocorr: LossAutocorrelation | None = None
    bursts: BurstCensus

    @model_validator(mode="after")
    def _consistent_counts(self) -> "MetricsReport":
        if self.n_rx + self.n_loss != self.n:
            raise ValueError("N_R + N_L deve ser igual a N")
        if self.loss_ratio != self.n_loss / self.n:
            raise ValueError("Υ_L inconsistente com N_L/N")
        return self
