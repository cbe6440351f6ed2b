"""Command-line entry point.

    steersim predict  --config cfg.json --out DIR
    steersim simulate --config cfg.json --out DIR [--seed N] [--threads N] [--diagnostic]
    steersim scan     --config cfg.json --out DIR
    steersim power    --config cfg.json --out DIR

Exit codes: 0 success (including scientific "inconclusive" outcomes),
2 invalid configuration, 3 physics error.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, experiment
from .config import ExperimentConfig, canonical_json, config_hash, load_config
from .errors import ConfigInvalid, PhysicsError
from .montecarlo import BRANCHES, OUTCOMES, WINGS, EventLog, NO_BRANCH, NO_PAIR
from .spectra import InterferencePattern

log = logging.getLogger("steersim")

EVENT_SCHEMA_VERSION = 1
DIAGNOSTIC_MARK = "NON-OBSERVABLE DIAGNOSTIC"
EXIT_CONFIG, EXIT_PHYSICS = 2, 3


def pattern_csv(p: InterferencePattern) -> str:
    lines = ["delay_s,value,error"]
    lines += [f"{d!r},{v!r},{e!r}" for d, v, e in
              zip(p.delays.tolist(), p.values.tolist(), p.errors.tolist())]
    return "\n".join(lines) + "\n"


def read_pattern_csv(path) -> InterferencePattern:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return InterferencePattern(data[:, 0], data[:, 1], data[:, 2])


def event_log_text(ev: EventLog, cfg: ExperimentConfig, diagnostic: bool = False) -> str:
    """Line-delimited event records with '#'-prefixed header lines.

    The hidden branch column is written only for diagnostic exports, which
    are marked as non-observable in the header.
    """
    header = [
        "# steersim event log",
        f"# schema_version: {EVENT_SCHEMA_VERSION}",
        f"# config_sha256: {config_hash(cfg)}",
        f"# seed: {cfg.run.seed}",
    ]
    cols = ["pair_id", "wing", "timestamp_s", "outcome"]
    if diagnostic:
        header.append(f"# {DIAGNOSTIC_MARK}")
        cols.append("hidden_branch")
    header.append("# columns: " + ",".join(cols))
    pid = ["NONE" if p == NO_PAIR else str(p) for p in ev.pair_id.tolist()]
    wing = [WINGS[w] for w in ev.wing.tolist()]
    ts = [repr(t) for t in ev.timestamp.tolist()]
    outc = [OUTCOMES[o] for o in ev.outcome.tolist()]
    fields = [pid, wing, ts, outc]
    if diagnostic:
        fields.append(["NONE" if b == NO_BRANCH else BRANCHES[b]
                       for b in ev.hidden_branch.tolist()])
    body = [",".join(row) for row in zip(*fields)]
    return "\n".join(header + body) + "\n"


def read_event_log(path) -> tuple[dict, list[dict]]:
    """Parse an event log file into (header fields, records)."""
    header, records, cols = {}, [], None
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#"):
                body = line[1:].strip()
                if body == DIAGNOSTIC_MARK:
                    header["diagnostic"] = True
                elif ":" in body:
                    k, v = body.split(":", 1)
                    header[k.strip()] = v.strip()
                    if k.strip() == "columns":
                        cols = v.strip().split(",")
                continue
            values = line.split(",")
            rec = dict(zip(cols, values))
            rec["pair_id"] = None if rec["pair_id"] == "NONE" else int(rec["pair_id"])
            rec["timestamp_s"] = float(rec["timestamp_s"])
            records.append(rec)
    return header, records


def _jsonable(obj):
    if isinstance(obj, float) and math.isinf(obj):
        return "inf" if obj > 0 else "-inf"
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return _jsonable(obj.item())
    return obj


def _metadata(cfg: ExperimentConfig, command: str, **extra) -> str:
    meta = {"tool": "steersim", "tool_version": __version__, "command": command,
            "config": cfg.echo(), "config_sha256": config_hash(cfg), **extra}
    return canonical_json(_jsonable(meta))


def _write_all(out: Path, files: dict[str, str]) -> None:
    """Write every file or none: partial outputs are removed on failure."""
    out.mkdir(parents=True, exist_ok=True)
    written = []
    try:
        for name, text in files.items():
            path = out / name
            tmp = path.with_suffix(path.suffix + ".part")
            with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
            written.append(tmp)
        for tmp in written:
            os.replace(tmp, tmp.with_suffix(""))
    except BaseException:
        for tmp in written:
            for p in (tmp, tmp.with_suffix("")):
                if p.exists():
                    p.unlink()
        raise


def cmd_predict(cfg: ExperimentConfig, out: Path) -> dict[str, str]:
    setup = experiment.build(cfg)
    pred = experiment.predict(setup)
    files = {"singles.csv": pattern_csv(pred.singles_bob)}
    if pred.coincidence is not None:
        files["coincidence.csv"] = pattern_csv(pred.coincidence)
    for name, p in zip(("branch_transmitted.csv", "branch_absorbed.csv"), pred.branch_patterns):
        if p is not None:
            files[name] = pattern_csv(p)
    files["metadata.json"] = _metadata(
        cfg, "predict",
        ordering=pred.ordering.verdict.value,
        collapse_applies=pred.collapse_applies,
        transmit_probability=pred.transmit_probability,
        branch_weights=list(pred.branch_weights),
        visibility=pred.visibility,
    )
    _write_all(out, files)
    return files


def cmd_simulate(cfg: ExperimentConfig, out: Path, threads: int = 1,
                 diagnostic: bool = False) -> dict[str, str]:
    setup = experiment.build(cfg)
    res = experiment.simulate(setup, threads=threads)
    files = {"events.log": event_log_text(res.log, cfg, diagnostic)}
    for name, p in res.patterns.items():
        files[f"{name}.csv"] = pattern_csv(p)
    files["metadata.json"] = _metadata(cfg, "simulate", diagnostic=diagnostic,
                                       summary=res.summary)
    _write_all(out, files)
    return files


def cmd_scan(cfg: ExperimentConfig, out: Path, threads: int = 1) -> dict[str, str]:
    setup = experiment.build(cfg)
    result = experiment.scan(setup, threads=threads)
    files = {"scan.json": _metadata(cfg, "scan", result=result)}
    _write_all(out, files)
    return files


def cmd_power(cfg: ExperimentConfig, out: Path) -> dict[str, str]:
    setup = experiment.build(cfg)
    files = {"power.json": _metadata(cfg, "power", report=experiment.power(setup))}
    _write_all(out, files)
    return files


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="steersim", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("predict", "simulate", "scan", "power"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, type=Path)
        p.add_argument("--out", required=True, type=Path)
        p.add_argument("--seed", type=int, default=None,
                       help="override run.seed from the config")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--diagnostic", action="store_true",
                       help="export hidden branch tags (simulate only)")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            if not 0 <= args.seed < 2 ** 64:
                raise ConfigInvalid("--seed must be a 64-bit unsigned integer")
            cfg = cfg.model_copy(update={"run": cfg.run.model_copy(update={"seed": args.seed})})
        if args.threads < 1:
            raise ConfigInvalid("--threads must be >= 1")
        if args.command == "predict":
            files = cmd_predict(cfg, args.out)
        elif args.command == "simulate":
            files = cmd_simulate(cfg, args.out, args.threads, args.diagnostic)
        elif args.command == "scan":
            files = cmd_scan(cfg, args.out, args.threads)
        else:
            files = cmd_power(cfg, args.out)
    except ConfigInvalid as exc:
        print(f"steersim: configuration error:\n{exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"steersim: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PhysicsError as exc:
        print(f"steersim: physics error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_PHYSICS
    log.info("wrote %s", ", ".join(sorted(files)))
    return 0


if __name__ == "__main__":
    sys.exit(main())
