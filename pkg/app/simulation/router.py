from fastapi import APIRouter, HTTPException, Query, Response

from app.simulation.schemas import SimConfig
from app.simulation.service import simulate_trial
from app.trace_io.service import format_trial

router = APIRouter()


@router.post("/trials", response_class=Response)
def create_trial(config: SimConfig, seed: int | None = Query(None, ge=0, lt=2**64)):
    """Run one simulated trial and return it as a trace file."""
    if seed is not None:
        config = config.model_copy(update={"seed": seed})
    try:
        trial = simulate_trial(config)
    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e))
    return Response(
        content=format_trial(trial),
        media_type="text/csv",
        headers={"Content-Disposition": f'attachment; filename="trial-{config.seed}.csv"'},
    )
