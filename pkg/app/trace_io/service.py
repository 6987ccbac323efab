"""On-disk formats: trial traces, CCDF and autocorrelation plot data, text reports.

Every writer emits ``\\n`` line endings, period decimal separators and no
thousands grouping, so the same input always yields the same bytes. Times in
files are integer microseconds; the human-readable tables print milliseconds
and per-mille ratios.
"""

import contextlib
import logging
from collections.abc import Iterable, Iterator, Sequence
from pathlib import Path
from typing import IO

import numpy as np
from pydantic import ValidationError

from app.config import settings
from app.independence.schemas import IndependenceReport, IndependenceVerdict
from app.metrics.schemas import ECcdf, LossAutocorrelation, MetricsReport
from app.traces.models import ChannelId, ChannelTrace, Trial
from app.traces.service import TraceError, TraceValidationError, trial_end_for

logger = logging.getLogger(__name__)

TRACE_HEADER = "seq,tT_A_us,tR_A_us,tT_B_us,tR_B_us"
_METADATA_KEYS = ("period_us", "seed", "trial_end_us", "grace_us", "skew_bound_us", "tx_jitter_us")

Destination = str | Path | IO[str]


class TraceFormatError(TraceError):
    """Malformed trace or data file; ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"linha {line}: {message}" if line is not None else message)


@contextlib.contextmanager
def _text_stream(target: Destination, mode: str) -> Iterator[IO[str]]:
    if isinstance(target, (str, Path)):
        with open(target, mode, encoding="utf-8", newline="\n") as f:
            yield f
    else:
        yield target


# --- Trial traces ---


def _format_rx(has_rx: bool, t_rx: int) -> str:
    return str(t_rx) if has_rx else ""


def iter_trial_lines(trial: Trial) -> Iterator[str]:
    """Lines of the trace file, without terminators."""
    yield f"# period_us={trial.period_us}"
    if trial.seed is not None:
        yield f"# seed={trial.seed}"
    yield f"# trial_end_us={trial.trial_end_us}"
    yield f"# grace_us={trial.grace_us}"
    yield f"# skew_bound_us={trial.skew_bound_us}"
    if trial.tx_jitter_us is not None:
        yield f"# tx_jitter_us={trial.tx_jitter_us}"
    yield TRACE_HEADER

    a, b = trial.trace_a, trial.trace_b
    columns = zip(
        a.seq.tolist(), a.t_tx.tolist(), a.t_rx.tolist(), a.has_rx.tolist(),
        b.t_tx.tolist(), b.t_rx.tolist(), b.has_rx.tolist(),
    )
    for seq, tx_a, rx_a, ok_a, tx_b, rx_b, ok_b in columns:
        yield f"{seq},{tx_a},{_format_rx(ok_a, rx_a)},{tx_b},{_format_rx(ok_b, rx_b)}"


def format_trial(trial: Trial) -> str:
    return "".join(f"{line}\n" for line in iter_trial_lines(trial))


def write_trial(trial: Trial, destination: Destination) -> None:
    with _text_stream(destination, "w") as f:
        for line in iter_trial_lines(trial):
            f.write(line)
            f.write("\n")


def _parse_int(text: str, what: str, line: int) -> int:
    try:
        return int(text)
    except ValueError:
        raise TraceFormatError(f"{what} não é um inteiro: {text!r}", line) from None


def _parse_metadata(body: str, line: int, metadata: dict[str, int]) -> None:
    key, sep, value = body.partition("=")
    key = key.strip()
    if not sep:
        # free-form comment
        return
    if key not in _METADATA_KEYS:
        logger.debug("Metadado desconhecido ignorado na linha %d: %s", line, key)
        return
    metadata[key] = _parse_int(value.strip(), key, line)


def parse_trial(lines: Iterable[str]) -> Trial:
    """Build a Trial from trace file lines, reporting the offending line on error."""
    metadata: dict[str, int] = {}
    header_seen = False
    seq: list[int] = []
    tx_a: list[int] = []
    rx_a: list[int] = []
    ok_a: list[bool] = []
    tx_b: list[int] = []
    rx_b: list[int] = []
    ok_b: list[bool] = []

    for number, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n").rstrip("\r")
        if not line.strip():
            continue
        if line.startswith("#"):
            if header_seen:
                raise TraceFormatError("metadados depois do cabeçalho", number)
            _parse_metadata(line[1:], number, metadata)
            continue
        if not header_seen:
            if line.strip() != TRACE_HEADER:
                raise TraceFormatError(f"cabeçalho esperado {TRACE_HEADER!r}", number)
            header_seen = True
            continue

        fields = line.split(",")
        if len(fields) != 5:
            raise TraceFormatError(f"esperados 5 campos, encontrados {len(fields)}", number)
        s, ta, ra, tb, rb = fields
        if not s or not ta or not tb:
            raise TraceFormatError("seq e instantes de transmissão são obrigatórios", number)
        seq.append(_parse_int(s, "seq", number))
        tx_a.append(_parse_int(ta, "tT_A_us", number))
        tx_b.append(_parse_int(tb, "tT_B_us", number))
        ok_a.append(bool(ra))
        rx_a.append(_parse_int(ra, "tR_A_us", number) if ra else 0)
        ok_b.append(bool(rb))
        rx_b.append(_parse_int(rb, "tR_B_us", number) if rb else 0)

    if not header_seen:
        raise TraceFormatError("cabeçalho ausente")
    if not seq:
        raise TraceFormatError("traço sem pacotes")

    tx_a_arr, tx_b_arr = np.array(tx_a, dtype=np.int64), np.array(tx_b, dtype=np.int64)
    period_us = metadata.get("period_us")
    if period_us is None:
        if len(seq) < 2:
            raise TraceFormatError("period_us ausente e impossível de inferir com um pacote")
        period_us = int(np.median(np.diff(tx_a_arr)))
        logger.warning("Metadado period_us ausente; inferido %d µs dos instantes de A", period_us)

    skew_bound_us = metadata.get("skew_bound_us")
    if skew_bound_us is None:
        skew_bound_us = settings.skew_bound_us
        logger.warning("Metadado skew_bound_us ausente; usando %d µs", skew_bound_us)

    last_tx = int(max(tx_a_arr.max(), tx_b_arr.max()))
    grace_us = metadata.get("grace_us")
    trial_end_us = metadata.get("trial_end_us")
    if trial_end_us is None:
        if grace_us is None:
            grace_us = settings.grace_us
            logger.warning("Metadado grace_us ausente; usando %d µs", grace_us)
        trial_end_us = trial_end_for(tx_a_arr, tx_b_arr, grace_us)
        logger.warning("Metadado trial_end_us ausente; usando %d µs", trial_end_us)
    elif grace_us is None:
        grace_us = max(0, trial_end_us - last_tx)

    try:
        trace_a = ChannelTrace(
            channel=ChannelId.A, seq=seq, t_tx=tx_a_arr, t_rx=rx_a, has_rx=ok_a,
            trial_end_us=trial_end_us,
        )
        trace_b = ChannelTrace(
            channel=ChannelId.B, seq=seq, t_tx=tx_b_arr, t_rx=rx_b, has_rx=ok_b,
            trial_end_us=trial_end_us,
        )
        return Trial(
            period_us=period_us,
            n_packets=len(seq),
            trace_a=trace_a,
            trace_b=trace_b,
            skew_bound_us=skew_bound_us,
            grace_us=grace_us,
            tx_jitter_us=metadata.get("tx_jitter_us"),
            seed=metadata.get("seed"),
        )
    except ValidationError as e:
        messages = "; ".join(err["msg"] for err in e.errors())
        raise TraceValidationError(f"Traço inválido: {messages}") from e


def loads_trial(text: str) -> Trial:
    return parse_trial(text.splitlines())


def read_trial(source: Destination) -> Trial:
    with _text_stream(source, "r") as f:
        return parse_trial(f)


# --- Plot data ---


def _ms(h_us: int) -> str:
    return f"{h_us / 1000:.3f}"


def iter_ccdf_rows(ccdf: ECcdf) -> Iterator[tuple[int, float]]:
    """Vertices of the step function: (0, 1), both sides of every jump, then the last point."""
    bp = ccdf.breakpoints_us.tolist()
    values = ccdf.values.tolist()
    yield 0, 1.0
    before = 1.0
    for h, after in zip(bp, values):
        yield h, before
        yield h, after
        before = after
    yield bp[-1], values[-1]


def format_ccdf(ccdf: ECcdf) -> str:
    return "".join(f"{_ms(h)} {v!r}\n" for h, v in iter_ccdf_rows(ccdf))


def export_ccdf(ccdf: ECcdf, destination: Destination) -> None:
    if len(ccdf) == 0:
        raise ValueError("CCDF vazia não pode ser exportada")
    with _text_stream(destination, "w") as f:
        f.write(format_ccdf(ccdf))


def read_ccdf(source: Destination) -> ECcdf:
    """Inverse of :func:`export_ccdf`."""
    rows: list[tuple[int, float]] = []
    with _text_stream(source, "r") as f:
        for number, raw in enumerate(f, start=1):
            parts = raw.split()
            if not parts:
                continue
            if len(parts) != 2:
                raise TraceFormatError("esperadas 2 colunas (h_ms valor)", number)
            try:
                h_us = round(float(parts[0]) * 1000)
                value = float(parts[1])
            except ValueError:
                raise TraceFormatError(f"número inválido: {raw.strip()!r}", number) from None
            rows.append((h_us, value))
    if len(rows) < 4 or len(rows) % 2:
        raise TraceFormatError(f"quantidade de linhas inválida para uma CCDF: {len(rows)}")
    after_jump = rows[2:-1:2]
    return ECcdf(
        breakpoints_us=[h for h, _ in after_jump],
        values=[v for _, v in after_jump],
    )


def write_autocorrelation(autocorr: LossAutocorrelation, destination: Destination) -> None:
    """Columns ``k r_hat [pi_hat]``; the last column is absent when Υ_L = 0."""
    with _text_stream(destination, "w") as f:
        f.write(f"# n={autocorr.n} max_lag={autocorr.max_lag} loss_ratio={autocorr.loss_ratio!r}\n")
        if autocorr.pi_hat is None:
            f.write("# k r_hat\n")
            for k, r in enumerate(autocorr.r_hat):
                f.write(f"{k} {r!r}\n")
        else:
            f.write("# k r_hat pi_hat\n")
            for k, (r, pi) in enumerate(zip(autocorr.r_hat, autocorr.pi_hat)):
                f.write(f"{k} {r!r} {pi!r}\n")


# --- Reports ---


def _or_dash(value) -> str:
    if value is None:
        return "-"
    return repr(value) if isinstance(value, float) else str(value)


def render_metrics_block(report: MetricsReport) -> str:
    """Flat ``key = value`` block; ``-`` marks an undefined statistic."""
    pairs: list[tuple[str, object]] = [
        ("channel", report.channel.display),
        ("n", report.n),
        ("n_rx", report.n_rx),
        ("n_loss", report.n_loss),
        ("loss_ratio", report.loss_ratio),
        ("mean_us", report.mean_us),
        ("std_us", report.std_us),
        ("p9999_us", report.p9999_us),
        ("max_us", report.max_us),
    ]
    pairs += [(f"dmr_{h}", v) for h, v in sorted(report.dmr.items())]
    pairs += [
        ("bursts", " ".join(f"{b}:{c}" for b, c in sorted(report.bursts.histogram.items()))),
        ("b_max", report.bursts.b_max),
    ]
    return "".join(f"{key} = {_or_dash(value)}\n" for key, value in pairs)


def _parse_value(text: str):
    if text == "-":
        return None
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def parse_metrics_block(text: str) -> dict[str, object]:
    parsed: dict[str, object] = {}
    for number, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        key, sep, value = line.partition(" = ")
        if not sep:
            raise TraceFormatError("esperado 'chave = valor'", number)
        if key == "bursts":
            parsed[key] = {
                int(b): int(c) for b, c in (item.split(":") for item in value.split())
            }
        else:
            parsed[key] = _parse_value(value)
    return parsed


def _permille(ratio: float | None) -> str:
    return "-" if ratio is None else f"{ratio * 1000:.3f}"


def _ms_or_dash(value_us: float | None) -> str:
    return "-" if value_us is None else f"{value_us / 1000:.3f}"


def render_latency_table(
    reports: Sequence[MetricsReport],
    deadlines_us: Sequence[int],
    independence: IndependenceReport | None = None,
    verdict: IndependenceVerdict | None = None,
) -> str:
    """Per-channel latency and loss table, ratios in ‰ and times in ms.

    Columns run d̄, σ, p99.99, max, one Υ_d>H per deadline and Υ_L last. With an
    independence report each Υ gains its Υ̂ column, D_KS sits before Υ_L and
    the verdict closes the row; only the AB row fills those cells.
    """
    with_estimates = independence is not None
    header = ["Canal", "d̄[ms]", "σ[ms]", "p99.99[ms]", "max[ms]"]
    for h in deadlines_us:
        header.append(f"Υ_d>{h / 1000:g}ms[‰]")
        if with_estimates:
            header.append(f"Υ̂_d>{h / 1000:g}ms[‰]")
    if with_estimates:
        header.append("D_KS")
    header.append("Υ_L[‰]")
    if with_estimates:
        header += ["Υ̂_L[‰]", "Veredito"]

    rows = [header]
    for r in reports:
        estimated = with_estimates and r.channel is ChannelId.REDUNDANT
        row = [
            r.channel.display,
            _ms_or_dash(r.mean_us),
            _ms_or_dash(r.std_us),
            _ms_or_dash(r.p9999_us),
            _ms_or_dash(r.max_us),
        ]
        for h in deadlines_us:
            row.append(_permille(r.dmr.get(h)))
            if with_estimates:
                row.append(_permille(independence.est_dmr.get(h)) if estimated else "-")
        if with_estimates:
            d_ks = independence.d_ks if estimated else None
            row.append("-" if d_ks is None else f"{d_ks:.4f}")
        row.append(_permille(r.loss_ratio))
        if with_estimates:
            row.append(_permille(independence.est_loss) if estimated else "-")
            row.append(verdict.status if estimated and verdict is not None else "-")
        rows.append(row)
    return _render_columns(rows)


def render_burst_table(reports: Sequence[MetricsReport]) -> str:
    rows = [["Canal", "N_B=1", "N_B=2", "N_B=3", "N_B=4", "N_B>=5", "B_max"]]
    for r in reports:
        rows.append([r.channel.display, *(str(v) for v in r.bursts.table_row())])
    return _render_columns(rows)


def _render_columns(rows: list[list[str]]) -> str:
    widths = [max(len(row[c]) for row in rows) for c in range(len(rows[0]))]
    return "".join(
        "  ".join(cell.rjust(w) for cell, w in zip(row, widths)).rstrip() + "\n" for row in rows
    )
