from pydantic import BaseModel, Field, computed_field

from app.metrics.schemas import ECcdf


class IndependenceReport(BaseModel):
    n: int
    loss_a: float
    loss_b: float
    est_loss: float
    meas_loss: float
    est_dmr: dict[int, float] = {}
    meas_dmr: dict[int, float] = {}
    est_ccdf: ECcdf | None = None
    meas_ccdf: ECcdf | None = None
    d_ks: float | None = Field(default=None, ge=0.0, le=1.0)
    # (meas − est)/est per index; None when the estimate is zero
    relative_errors: dict[str, float | None] = {}


class IndependenceVerdict(BaseModel):
    passed: bool
    tolerance: float
    checked: list[str] = []
    failures: list[str] = []
    skipped: list[str] = []

    @computed_field
    @property
    def status(self) -> str:
        """``PASS``/``FAIL``, or ``N/A`` when every index was skipped."""
        if not self.checked:
            return "N/A"
        return "PASS" if self.passed else "FAIL"


class DeadlinePrediction(BaseModel):
    """F̂^AB(h) with the ±D_KS band it is known to within."""

    h_us: int
    estimate: float
    low: float
    high: float


class CompareOut(BaseModel):
    report: IndependenceReport
    verdict: IndependenceVerdict
