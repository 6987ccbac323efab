from typing import Annotated, Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.config import settings
from app.simulation.presets import resolve_interferer, resolve_scenario

Probability = Annotated[float, Field(ge=0.0, le=1.0)]


# --- Latency tails ---
class ExponentialTail(BaseModel):
    kind: Literal["exponential"] = "exponential"
    mean_us: float = Field(default=300.0, ge=0)


class LogNormalTail(BaseModel):
    """Log-normal in µs: ln(tail) ~ N(mu, sigma²)."""

    kind: Literal["lognormal"] = "lognormal"
    mu: float = 5.5
    sigma: float = Field(default=0.8, ge=0)


class ConstantTail(BaseModel):
    kind: Literal["constant"] = "constant"
    value_us: float = Field(default=0.0, ge=0)


TailLaw = Annotated[ExponentialTail | LogNormalTail | ConstantTail, Field(discriminator="kind")]


# --- Service models ---
class UnicastService(BaseModel):
    kind: Literal["unicast"] = "unicast"
    per_attempt_error_prob: Probability = 0.1
    max_retries: int = Field(default=7, ge=0)
    base_latency_us: int = Field(default=500, ge=0)
    retry_latency_us: int = Field(default=300, ge=0)
    contention_tail: TailLaw = Field(default_factory=ExponentialTail)


class MulticastService(BaseModel):
    kind: Literal["multicast"] = "multicast"
    error_prob: Probability = 0.005
    base_latency_us: int = Field(default=700, ge=0)
    contention_tail: TailLaw = Field(default_factory=ExponentialTail)
    # DTIM rule: the AP holds multicast frames until the next beacon
    dtim_buffering: bool = False
    beacon_interval_us: int = Field(default=102_400, gt=0)


ServiceModel = Annotated[UnicastService | MulticastService, Field(discriminator="kind")]


# --- Burst state ---
class GilbertElliott(BaseModel):
    p_good_to_bad: Probability = 0.001
    p_bad_to_good: Probability = 0.3
    error_prob_good: Probability = 0.0
    error_prob_bad: Probability = 0.5

    @model_validator(mode="after")
    def _has_stationary_law(self) -> "GilbertElliott":
        if self.p_good_to_bad + self.p_bad_to_good == 0:
            raise ValueError("Cadeia Gilbert-Elliott sem distribuição estacionária única")
        return self

    @property
    def stationary_bad(self) -> float:
        return self.p_good_to_bad / (self.p_good_to_bad + self.p_bad_to_good)

    @property
    def stationary_loss_rate(self) -> float:
        pi_bad = self.stationary_bad
        return pi_bad * self.error_prob_bad + (1.0 - pi_bad) * self.error_prob_good


# --- Interferers ---
class InterfererScope(BaseModel):
    """Channel(s) an interferer acts on; with ``both``, B is also hit with probability coupling."""

    kind: Literal["A", "B", "both"] = "both"
    coupling: Probability = 1.0


class InterferenceEffect(BaseModel):
    hit_prob: Probability = 1.0
    extra_delay_us: int = Field(default=0, ge=0)
    extra_loss_prob: Probability = 0.0


class PeriodicInterferer(BaseModel):
    kind: Literal["periodic"] = "periodic"
    name: str | None = None
    period_us: int = Field(default=102_400, gt=0)
    phase_us: int = Field(default=0, ge=0)
    jitter_us: int = Field(default=0, ge=0)
    duration_us: int = Field(default=0, ge=0)
    hit_prob: Probability = 1.0
    extra_delay_us: int = Field(default=0, ge=0)
    extra_loss_prob: Probability = 0.0
    scope: InterfererScope = Field(default_factory=InterfererScope)

    @property
    def effect(self) -> InterferenceEffect:
        return InterferenceEffect(
            hit_prob=self.hit_prob,
            extra_delay_us=self.extra_delay_us,
            extra_loss_prob=self.extra_loss_prob,
        )


class BurstyPoissonInterferer(BaseModel):
    kind: Literal["bursty_poisson"] = "bursty_poisson"
    name: str | None = None
    mean_gap_us: int = Field(default=1_000_000, gt=0)
    burst_packets: int = Field(default=700, ge=1)
    burst_spacing_us: int = Field(default=500, ge=1)
    payload_effect: InterferenceEffect = Field(default_factory=InterferenceEffect)
    scope: InterfererScope = Field(default_factory=InterfererScope)

    @property
    def effect(self) -> InterferenceEffect:
        return self.payload_effect

    @property
    def burst_duration_us(self) -> int:
        return self.burst_packets * self.burst_spacing_us


Interferer = Annotated[
    PeriodicInterferer | BurstyPoissonInterferer, Field(discriminator="kind")
]


# --- Transmit skew between the two copies ---
class UniformSkew(BaseModel):
    kind: Literal["uniform"] = "uniform"
    low_us: int = -90
    high_us: int = 90

    @model_validator(mode="after")
    def _ordered(self) -> "UniformSkew":
        if self.low_us > self.high_us:
            raise ValueError("Limite inferior da defasagem maior que o superior")
        return self

    @property
    def bound_us(self) -> int:
        return max(abs(self.low_us), abs(self.high_us))


class ConstantSkew(BaseModel):
    kind: Literal["constant"] = "constant"
    value_us: int = 0

    @property
    def bound_us(self) -> int:
        return abs(self.value_us)


SkewLaw = Annotated[UniformSkew | ConstantSkew, Field(discriminator="kind")]


class ChannelConfig(BaseModel):
    service: ServiceModel = Field(default_factory=MulticastService)
    gilbert_elliott: GilbertElliott | None = None


class SimConfig(BaseModel):
    n_packets: int = Field(default=10_000, ge=1)
    period_us: int = Field(default=100_000, gt=0)
    skew: SkewLaw = Field(default_factory=UniformSkew)
    skew_bound_us: int = Field(default_factory=lambda: settings.skew_bound_us, ge=0)
    tx_jitter_us: int = Field(default=0, ge=0)
    grace_us: int = Field(default_factory=lambda: settings.grace_us, ge=0)
    channel_a: ChannelConfig = Field(default_factory=ChannelConfig)
    channel_b: ChannelConfig = Field(default_factory=ChannelConfig)
    interferers: list[Interferer] = []
    seed: int = Field(default=0, ge=0, lt=2**64)

    model_config = ConfigDict(extra="forbid")

    @model_validator(mode="before")
    @classmethod
    def _expand_scenario(cls, data):
        if isinstance(data, dict):
            return resolve_scenario(data)
        return data

    @field_validator("interferers", mode="before")
    @classmethod
    def _expand_interferer_presets(cls, v):
        if isinstance(v, list):
            return [resolve_interferer(e) if isinstance(e, dict) else e for e in v]
        return v

    @model_validator(mode="after")
    def _check_timing(self) -> "SimConfig":
        if self.skew.bound_us > self.skew_bound_us:
            raise ValueError(
                f"Lei de defasagem alcança {self.skew.bound_us} µs, acima do limite "
                f"{self.skew_bound_us} µs"
            )
        if self.tx_jitter_us + 2 * self.skew_bound_us >= self.period_us:
            raise ValueError("Jitter e defasagem de transmissão sobrepõem períodos consecutivos")
        return self

    def channel(self, label: str) -> ChannelConfig:
        return self.channel_a if label == "A" else self.channel_b
