"""Command-line entry point: analyze, snapshot, sweep, normality, synth."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from .config import SWEEP_AXES, RunConfig, load_config, parse_value
from .errors import ConfigError, DataError, FragilityError, NumericalError, ParseError
from .ingest import load_index_csv, write_index_csv
from .network import write_snapshot
from .synth import SynthSpec, generate, write_truth_csv

logger = logging.getLogger("fragility")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERICAL = 0, 2, 3, 4


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML file of key: value settings")
    p.add_argument("--out", help="output directory")
    p.add_argument("--jobs", type=int, help="worker processes")
    p.add_argument("--dry-run", action="store_true", help="validate config and input headers, compute nothing")
    p.add_argument("--input", help="index-level CSV (overrides the config key)")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one config key")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fragility", description="Co-jump network stability indicator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="rolling stability indicator, periods and contributions")
    _common(p)

    p = sub.add_parser("snapshot", help="P, Q, G matrices and node summary for one window")
    _common(p)
    p.add_argument("--start", required=True, help="first date (YYYY-MM-DD)")
    p.add_argument("--end", required=True, help="last date (YYYY-MM-DD)")
    p.add_argument("--matrices", action="store_true", help="include U, E, T in model.json")

    p = sub.add_parser("sweep", help="robustness sweep over one parameter")
    _common(p)
    p.add_argument("--axis", choices=SWEEP_AXES)
    p.add_argument("--values", help="comma-separated parameter values (default: the full range)")
    p.add_argument("--full", action="store_true", help="also write every series of the sweep")

    p = sub.add_parser("normality", help="P-P / Q-Q diagnostics of standardized series")
    _common(p)

    p = sub.add_parser("synth", help="generate a synthetic index panel")
    _common(p)
    p.add_argument("spec_path", nargs="?", help="YAML synth spec (defaults to --config)")
    return parser


def _config(args) -> RunConfig:
    overrides = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        overrides[k.strip()] = parse_value(v)
    if args.out is not None:
        overrides["out"] = args.out
    if args.jobs is not None:
        overrides["jobs"] = args.jobs
    if getattr(args, "input", None) is not None:
        overrides["input"] = args.input
    return load_config(args.config, overrides)


def _check_input(cfg: RunConfig) -> Path:
    if not cfg.input:
        raise ConfigError("no input file given (config key 'input' or --input)")
    path = Path(cfg.input)
    if not path.is_file():
        raise DataError(f"input file not found: {path}")
    return path


def _check_header(path: Path) -> list[str]:
    with path.open(newline="") as fh:
        header = next(csv.reader(fh), None)
    if not header or len(header) < 2:
        raise ParseError("header needs a date column and at least one market", row=1)
    markets = [h.strip() for h in header[1:]]
    if any(not m for m in markets) or len(set(markets)) != len(markets):
        raise ParseError("market identifiers must be non-empty and distinct", row=1)
    return markets


def _out_dir(cfg: RunConfig) -> Path:
    if not cfg.out:
        raise ConfigError("no output directory given (config key 'out' or --out)")
    return Path(cfg.out)


def _emit(key, value) -> None:
    print(f"{key}: {value}")


def cmd_analyze(args) -> int:
    from .decomposition import write_contributions_csv
    from .pipeline import analyze
    from .rolling import write_periods_csv, write_series_csv

    cfg = _config(args)
    path = _check_input(cfg)
    out = _out_dir(cfg)
    if args.dry_run:
        markets = _check_header(path)
        _emit("dry_run", "ok")
        _emit("markets", len(markets))
        return EXIT_OK
    panel = load_index_csv(path, cfg.ingest)
    result = analyze(panel, cfg)
    out.mkdir(parents=True, exist_ok=True)
    write_series_csv(result.series, result.periods, out / "stability.csv")
    write_periods_csv(result.periods, out / "periods.csv")
    write_contributions_csv(result.series.contributions, out / "contributions.csv")
    summary = result.summary()
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    (out / "config.yaml").write_text(_dump_config(cfg))
    for key in ("instability_periods", "peak_lambda", "peak_lambda_date", "peak_total_flow", "peak_total_flow_date"):
        _emit(key, summary[key])
    return EXIT_OK


def cmd_snapshot(args) -> int:
    from .pipeline import snapshot

    cfg = _config(args)
    path = _check_input(cfg)
    out = _out_dir(cfg)
    if args.start > args.end:
        raise ConfigError(f"--start {args.start} is after --end {args.end}")
    if args.dry_run:
        _check_header(path)
        _emit("dry_run", "ok")
        return EXIT_OK
    panel = load_index_csv(path, cfg.ingest)
    net, model = snapshot(panel, cfg, args.start, args.end)
    out.mkdir(parents=True, exist_ok=True)
    write_snapshot(net, out)
    info = model.to_dict(matrices=args.matrices)
    info["window"] = list(net.window)
    (out / "model.json").write_text(json.dumps(info, indent=2) + "\n")
    _emit("window", f"{net.window[0]}..{net.window[1]}")
    _emit("lambda", model.lam)
    counts = model.classification()
    _emit("amplifiers", counts["amplifier"])
    _emit("absorbers", counts["absorber"])
    return EXIT_OK


def cmd_sweep(args) -> int:
    from .robustness import sweep, write_sweep_csv

    cfg = _config(args)
    axis = args.axis or cfg.sweep_axis
    values = None
    if args.values:
        values = [parse_value(v.strip()) for v in args.values.split(",") if v.strip()]
    elif cfg.sweep_values is not None:
        values = list(cfg.sweep_values)
    path = _check_input(cfg)
    out = _out_dir(cfg)
    if args.dry_run:
        _check_header(path)
        from .robustness import _check_values, default_values

        _check_values(axis, values if values is not None else default_values(axis, cfg))
        _emit("dry_run", "ok")
        return EXIT_OK
    panel = load_index_csv(path, cfg.ingest)
    result = sweep(panel, axis, values, cfg)
    out.mkdir(parents=True, exist_ok=True)
    write_sweep_csv(result, out / f"sweep_{axis}.csv", out / f"sweep_{axis}_series.csv" if args.full else None)
    _emit("axis", axis)
    _emit("values_run", len(result.parameter_values))
    _emit("values_skipped", len(result.skipped))
    _emit("dates", len(result.window_ends))
    return EXIT_OK


def cmd_normality(args) -> int:
    from .ingest import compute_returns
    from .jumps import compute_stats
    from .robustness import normality_diagnostics, write_normality_csv

    cfg = _config(args)
    path = _check_input(cfg)
    out = _out_dir(cfg)
    if args.dry_run:
        _check_header(path)
        _emit("dry_run", "ok")
        return EXIT_OK
    panel = load_index_csv(path, cfg.ingest)
    returns = compute_returns(panel, cfg.time_shift, kind=cfg.return_kind)
    _, values = returns.series(cfg.basis)
    stats = compute_stats(values, returns.markets, min_obs=cfg.min_obs)
    report = normality_diagnostics(values, returns.markets, stats)
    write_normality_csv(report, out)
    flagged = sum(r.tail_flag for r in report.markets.values())
    _emit("markets", len(report.markets))
    _emit("tail_flagged", flagged)
    _emit("max_pp_dev", max((r.max_pp_dev for r in report.markets.values()), default=float("nan")))
    return EXIT_OK


def cmd_synth(args) -> int:
    spec_path = args.spec_path or args.config
    if not spec_path:
        raise ConfigError("synth needs a spec file (positional or --config)")
    spec = SynthSpec.from_yaml(spec_path)
    if args.out is None:
        raise ConfigError("no output directory given (--out)")
    out = Path(args.out)
    if args.dry_run:
        _emit("dry_run", "ok")
        return EXIT_OK
    panel, truth = generate(spec)
    out.mkdir(parents=True, exist_ok=True)
    write_index_csv(panel, out / "index.csv")
    write_truth_csv(truth, out / "truth.csv")
    _emit("markets", panel.n_markets)
    _emit("days", panel.n_dates)
    _emit("true_jumps", int(truth.jumps.sum()))
    return EXIT_OK


def _dump_config(cfg: RunConfig) -> str:
    import yaml

    settings = {k: v for k, v in cfg.to_dict().items() if k not in ("out", "jobs")}
    return yaml.safe_dump(settings, sort_keys=True)


COMMANDS = {
    "analyze": cmd_analyze,
    "snapshot": cmd_snapshot,
    "sweep": cmd_sweep,
    "normality": cmd_normality,
    "synth": cmd_synth,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, DataError, NumericalError) as exc:
        return _fail(exc, exc.exit_code)
    except OSError as exc:
        return _fail(exc, EXIT_DATA)
    except FragilityError as exc:
        return _fail(exc, EXIT_DATA)


def _fail(exc: Exception, code: int) -> int:
    kind = {EXIT_CONFIG: "config", EXIT_DATA: "data", EXIT_NUMERICAL: "numerical"}.get(code, "error")
    payload = {"error": kind, "type": type(exc).__name__, "message": str(exc), "exit_code": code}
    if isinstance(exc, NumericalError) and exc.diagnostics:
        payload["diagnostics"] = {k: (v if isinstance(v, (int, float, str, bool)) else str(v)) for k, v in exc.diagnostics.items()}
    print(json.dumps(payload), file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
