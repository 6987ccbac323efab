from fastapi import APIRouter, Depends, Form, HTTPException
from pydantic import BaseModel

from app.config import settings
from app.metrics.schemas import MetricsReport
from app.metrics.service import compute_metrics, parse_deadlines
from app.trace_io.dependencies import uploaded_trial
from app.traces.models import Trial
from app.traces.service import merge_redundant

router = APIRouter()


class AnalysisOut(BaseModel):
    deadlines_us: list[int]
    reports: list[MetricsReport]


@router.post("/analyze", response_model=AnalysisOut)
def analyze_trace(
    trial: Trial = Depends(uploaded_trial),
    deadlines: str | None = Form(None),
    max_lag: int | None = Form(None, ge=0),
    include_ccdf: bool = Form(False),
):
    """Per-channel indices for A, B and the redundant link of an uploaded trace."""
    try:
        deadlines_us = parse_deadlines(deadlines) if deadlines else settings.deadlines_us
        traces = (trial.trace_a, trial.trace_b, merge_redundant(trial))
        reports = [compute_metrics(t, deadlines_us, max_lag) for t in traces]
    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e))
    if not include_ccdf:
        reports = [r.model_copy(update={"ccdf": None}) for r in reports]
    return AnalysisOut(deadlines_us=deadlines_us, reports=reports)
