"""Channel-independence diagnostics.

If losses and latencies on A and B are statistically independent, the
redundant link's loss ratio, deadline miss ratios and latency CCDF follow from
the per-channel measurements alone. Comparing those predictions with what the
merged trace actually shows reveals coupling between the channels.
"""

import logging
from collections.abc import Iterable

import numpy as np

from app.config import settings
from app.independence.schemas import DeadlinePrediction, IndependenceReport, IndependenceVerdict
from app.metrics.schemas import ECcdf
from app.metrics.service import deadline_miss_ratio, eccdf, loss_ratio
from app.traces.models import Trial
from app.traces.service import merge_redundant

logger = logging.getLogger(__name__)


class DegenerateChannelsError(ValueError):
    """Raised when both channels lose every packet, so nothing can be predicted."""


def _check_probability(*values: float) -> None:
    for v in values:
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"Probabilidade fora de [0, 1]: {v}")


def product_loss_estimate(loss_a: float, loss_b: float) -> float:
    """Υ̂_L^AB = Υ_L^A · Υ_L^B."""
    _check_probability(loss_a, loss_b)
    return loss_a * loss_b


def product_dmr_estimate(dmr_a: float, dmr_b: float) -> float:
    """Υ̂_{d>H}^AB = Υ_{d>H}^A · Υ_{d>H}^B."""
    _check_probability(dmr_a, dmr_b)
    return dmr_a * dmr_b


def combined_ccdf(
    ccdf_a: ECcdf | None, ccdf_b: ECcdf | None, p_loss_a: float, p_loss_b: float
) -> ECcdf:
    """Predicted CCDF of the redundant-link latency, evaluated over both breakpoint sets.

    A channel's CCDF may be None only when that channel loses everything.
    """
    _check_probability(p_loss_a, p_loss_b)
    denominator = 1.0 - p_loss_a * p_loss_b
    if denominator <= 0.0:
        raise DegenerateChannelsError("Ambos os canais perdem todos os pacotes")
    if (ccdf_a is None and p_loss_a < 1.0) or (ccdf_b is None and p_loss_b < 1.0):
        raise ValueError("CCDF ausente para um canal que entrega pacotes")

    grids = [c.breakpoints_us for c in (ccdf_a, ccdf_b) if c is not None]
    h = grids[0] if len(grids) == 1 else np.union1d(*grids)
    f_a = ccdf_a.evaluate(h) if ccdf_a is not None else np.zeros(h.shape[0])
    f_b = ccdf_b.evaluate(h) if ccdf_b is not None else np.zeros(h.shape[0])
    p_rx_a, p_rx_b = 1.0 - p_loss_a, 1.0 - p_loss_b

    numerator = (
        p_loss_a * p_rx_b * f_b
        + p_loss_b * p_rx_a * f_a
        + p_rx_a * p_rx_b * f_a * f_b
    )
    values = np.clip(numerator / denominator, 0.0, 1.0)
    # Rounding must not break monotonicity
    values = np.minimum.accumulate(values)
    return ECcdf(breakpoints_us=h, values=values)


def ks_distance(ccdf_1: ECcdf, ccdf_2: ECcdf) -> float:
    """sup_h |F̄₁(h) − F̄₂(h)|, checked on both sides of every jump of either function."""
    h = np.union1d(ccdf_1.breakpoints_us, ccdf_2.breakpoints_us)
    at_jump = np.abs(ccdf_1.evaluate(h) - ccdf_2.evaluate(h))
    before_jump = np.abs(ccdf_1.evaluate_left(h) - ccdf_2.evaluate_left(h))
    return float(max(at_jump.max(), before_jump.max()))


def _relative_error(measured: float, estimate: float) -> float | None:
    if estimate <= 0.0:
        return None
    return (measured - estimate) / estimate


def independence_report(
    trial: Trial, thresholds_us: Iterable[int] | None = None
) -> IndependenceReport:
    thresholds_us = settings.deadlines_us if thresholds_us is None else list(thresholds_us)
    a, b = trial.trace_a, trial.trace_b
    ab = merge_redundant(trial)

    loss_a, loss_b = loss_ratio(a), loss_ratio(b)
    est_loss = product_loss_estimate(loss_a, loss_b)
    meas_loss = loss_ratio(ab)

    est_dmr = {
        h: product_dmr_estimate(deadline_miss_ratio(a, h), deadline_miss_ratio(b, h))
        for h in thresholds_us
    }
    meas_dmr = {h: deadline_miss_ratio(ab, h) for h in thresholds_us}

    ccdf_a = eccdf(a) if a.n_rx else None
    ccdf_b = eccdf(b) if b.n_rx else None
    est_ccdf = None
    if est_loss < 1.0:
        est_ccdf = combined_ccdf(ccdf_a, ccdf_b, loss_a, loss_b)
    meas_ccdf = eccdf(ab) if ab.n_rx else None
    d_ks = None
    if est_ccdf is not None and meas_ccdf is not None:
        d_ks = ks_distance(meas_ccdf, est_ccdf)

    relative_errors: dict[str, float | None] = {"loss": _relative_error(meas_loss, est_loss)}
    for h in thresholds_us:
        relative_errors[f"dmr_{h}"] = _relative_error(meas_dmr[h], est_dmr[h])

    logger.info(
        "Independência: Υ_L^AB medido=%.6g estimado=%.6g, D_KS=%s",
        meas_loss,
        est_loss,
        f"{d_ks:.4f}" if d_ks is not None else "indefinido",
    )
    return IndependenceReport(
        n=trial.n_packets,
        loss_a=loss_a,
        loss_b=loss_b,
        est_loss=est_loss,
        meas_loss=meas_loss,
        est_dmr=est_dmr,
        meas_dmr=meas_dmr,
        est_ccdf=est_ccdf,
        meas_ccdf=meas_ccdf,
        d_ks=d_ks,
        relative_errors=relative_errors,
    )


def _estimate_for(report: IndependenceReport, key: str) -> float:
    if key == "loss":
        return report.est_loss
    return report.est_dmr[int(key.removeprefix("dmr_"))]


def verdict(
    report: IndependenceReport,
    tolerance: float | None = None,
    min_expected_events: int | None = None,
) -> IndependenceVerdict:
    """PASS when every sufficiently populated index is within ``tolerance`` of its estimate.

    Indices whose estimate predicts fewer than ``min_expected_events`` events in
    the trial are too noisy to judge and are skipped, as are zero estimates.
    ``passed`` stays true when nothing was checked; ``status`` then reads N/A.
    """
    tolerance = settings.independence_tolerance if tolerance is None else tolerance
    if min_expected_events is None:
        min_expected_events = settings.min_expected_events

    checked, failures, skipped = [], [], []
    for key, error in report.relative_errors.items():
        if error is None or _estimate_for(report, key) * report.n < min_expected_events:
            skipped.append(key)
            continue
        checked.append(key)
        if abs(error) > tolerance:
            failures.append(key)
    if not checked:
        logger.warning(
            "Nenhum índice com eventos suficientes (mínimo %d); veredito N/A", min_expected_events
        )
    return IndependenceVerdict(
        passed=not failures, tolerance=tolerance, checked=checked, failures=failures,
        skipped=skipped,
    )


def predict_deadline_probability(est_ccdf: ECcdf, d_ks: float, h_us: int) -> DeadlinePrediction:
    """P(D^AB > h) read off the predicted CCDF, bracketed by ±D_KS."""
    estimate = est_ccdf.evaluate(h_us)
    return DeadlinePrediction(
        h_us=h_us,
        estimate=estimate,
        low=max(0.0, estimate - d_ks),
        high=min(1.0, estimate + d_ks),
    )
