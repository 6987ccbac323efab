from fastapi import APIRouter, Depends, Form, HTTPException

from app.independence.schemas import CompareOut
from app.independence.service import independence_report, verdict
from app.metrics.service import parse_deadlines
from app.trace_io.dependencies import uploaded_trial
from app.traces.models import Trial

router = APIRouter()


@router.post("/compare", response_model=CompareOut)
def compare_channels(
    trial: Trial = Depends(uploaded_trial),
    deadlines: str | None = Form(None),
    tolerance: float | None = Form(None, gt=0),
    include_ccdf: bool = Form(False),
):
    """Measured redundant-link indices against the prediction from independent channels."""
    try:
        thresholds = parse_deadlines(deadlines) if deadlines else None
        report = independence_report(trial, thresholds)
    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e))
    result = verdict(report, tolerance=tolerance)
    if not include_ccdf:
        report = report.model_copy(update={"est_ccdf": None, "meas_ccdf": None})
    return CompareOut(report=report, verdict=result)
