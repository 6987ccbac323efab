"""Command-line front end: ``pow-lab simulate | analyze | compare``.

Reports go to stdout and are byte-identical for identical invocations; logs
go to stderr. Exit status is 0 on success, 1 on a processing error and 2 on a
usage error.
"""

import argparse
import logging
import sys
from pathlib import Path

from app.config import isolate_from_environment
from app.independence.service import independence_report, verdict
from app.metrics.service import compute_metrics, eccdf, parse_deadlines
from app.simulation.service import load_config, simulate_trial
from app.trace_io.service import (
    export_ccdf,
    read_trial,
    render_burst_table,
    render_latency_table,
    write_autocorrelation,
    write_trial,
)
from app.traces.service import merge_redundant

logger = logging.getLogger("app.cli")


def _deadlines(text: str) -> list[int]:
    try:
        return parse_deadlines(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from None


def _existing_file(text: str) -> Path:
    path = Path(text)
    if not path.is_file():
        raise argparse.ArgumentTypeError(f"arquivo não encontrado: {text}")
    return path


def _output_dir(args: argparse.Namespace) -> Path:
    out_dir = args.out_dir or args.trace.parent
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir


def cmd_simulate(args: argparse.Namespace) -> int:
    config = load_config(args.config, seed=args.seed)
    trial = simulate_trial(config)
    if args.out == "-":
        write_trial(trial, sys.stdout)
        summary_stream = sys.stderr
    else:
        write_trial(trial, args.out)
        summary_stream = sys.stdout
    print(
        f"N={trial.n_packets} "
        f"loss_A={trial.trace_a.n_loss / trial.n_packets:.6f} "
        f"loss_B={trial.trace_b.n_loss / trial.n_packets:.6f}",
        file=summary_stream,
    )
    return 0


def cmd_analyze(args: argparse.Namespace, settings) -> int:
    trial = read_trial(args.trace)
    deadlines = args.deadlines or settings.deadlines_us
    max_lag = args.max_lag
    if max_lag is None:
        max_lag = min(settings.max_lag_cap, trial.n_packets // 10)

    traces = (trial.trace_a, trial.trace_b, merge_redundant(trial))
    reports = [compute_metrics(t, deadlines, max_lag) for t in traces]

    out_dir = _output_dir(args)
    for report in reports:
        if report.autocorr is None:
            continue
        path = out_dir / f"{args.trace.stem}.autocorr.{report.channel.display}.dat"
        write_autocorrelation(report.autocorr, path)
        logger.info("Autocorrelação gravada em %s", path)

    sys.stdout.write(render_latency_table(reports, deadlines))
    sys.stdout.write("\n")
    sys.stdout.write(render_burst_table(reports))
    return 0


def cmd_compare(args: argparse.Namespace, settings) -> int:
    trial = read_trial(args.trace)
    deadlines = args.deadlines or settings.deadlines_us
    report = independence_report(trial, deadlines)
    result = verdict(
        report,
        tolerance=args.tolerance if args.tolerance is not None else settings.independence_tolerance,
        min_expected_events=settings.min_expected_events,
    )

    out_dir = _output_dir(args)
    ccdfs = {
        "A": eccdf(trial.trace_a) if trial.trace_a.n_rx else None,
        "B": eccdf(trial.trace_b) if trial.trace_b.n_rx else None,
        "AB": report.meas_ccdf,
        "AB_est": report.est_ccdf,
    }
    for name, ccdf in ccdfs.items():
        if ccdf is None:
            logger.warning("CCDF %s indefinida (nenhum pacote recebido); arquivo omitido", name)
            continue
        export_ccdf(ccdf, out_dir / f"{args.trace.stem}.ccdf.{name}.dat")

    traces = (trial.trace_a, trial.trace_b, merge_redundant(trial))
    # max_lag = n skips the autocorrelation, which compare does not report
    reports = [compute_metrics(t, deadlines, max_lag=t.n) for t in traces]
    sys.stdout.write(render_latency_table(reports, deadlines, report, result))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pow-lab", description="Simulação e análise de redundância PRP sobre Wi-Fi"
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="logs de depuração")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="simula um trial e grava o traço")
    sim.add_argument("config", type=_existing_file, help="arquivo TOML de configuração")
    sim.add_argument("--seed", type=int, default=None, help="sobrepõe a semente do arquivo")
    sim.add_argument("--out", default="trace.csv", help="traço de saída ('-' para stdout)")

    analyze = sub.add_parser("analyze", help="índices por canal (A, B, AB)")
    analyze.add_argument("trace", type=_existing_file)
    analyze.add_argument("--deadlines", type=_deadlines, default=None, help="ex.: 1,3,10,30ms")
    analyze.add_argument("--max-lag", type=int, default=None, help="atraso máximo K")
    analyze.add_argument("--out-dir", type=Path, default=None)

    compare = sub.add_parser("compare", help="medido contra a previsão de canais independentes")
    compare.add_argument("trace", type=_existing_file)
    compare.add_argument("--deadlines", type=_deadlines, default=None, help="ex.: 1,3,10,30ms")
    compare.add_argument("--tolerance", type=float, default=None, help="erro relativo aceito")
    compare.add_argument("--out-dir", type=Path, default=None)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    settings = isolate_from_environment()
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else settings.log_level, stream=sys.stderr
    )

    try:
        settings.validate_runtime()
        if args.command == "simulate":
            return cmd_simulate(args)
        if args.command == "analyze":
            return cmd_analyze(args, settings)
        return cmd_compare(args, settings)
    except (ValueError, OSError) as e:
        print(f"erro: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
