"""Command-line entry point: ``mecalloc solve|sweep|verify``."""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .energy import total_weighted_energy
from .errors import FormatError, InfeasibleError, SizeError
from .harness import (METHODS, emit_csv, instance_to_dict, load_config,
                      parse_instance_json, run_sweep, solve_with)
from .schedule import DurationTriple, build_schedule
from .verify import SUITES, run_suites

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE = 0, 1, 2


def _clean(x):
    """JSON-safe copy: numpy to Python, non-finite floats to null."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_clean(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return float(x) if math.isfinite(x) else None
    return x


def result_to_dict(instance, res) -> dict:
    """Result document; task numbers in ``sequence`` are 1-based."""
    seq = res.sequence
    out = {
        "method": res.method,
        "K": instance.K,
        "deadline_s": instance.params.deadline_s,
        "sequence": None if seq is None else [k + 1 for k in seq],
        "allocation": {"upload_s": res.allocation.upload_s,
                       "download_s": res.allocation.download_s},
        "energy_j": res.energy_j,
        "makespan_s": res.makespan_s,
    }
    eb = total_weighted_energy(instance, res.allocation)
    out["energy_breakdown"] = {"upload_j": eb.upload_j, "download_j": eb.download_j,
                               "exec_j": eb.exec_j, "total_weighted_j": eb.total_weighted_j}
    if seq is not None:
        d = DurationTriple.from_allocation(instance, res.allocation)
        s = build_schedule(seq, d)
        out["schedule"] = {
            "start_upload_s": s.start_upload, "complete_upload_s": s.complete_upload,
            "start_exec_s": s.start_exec, "complete_exec_s": s.complete_exec,
            "start_download_s": s.start_download, "complete_download_s": s.complete_download,
        }
    else:
        out["schedule"] = None
    out["diagnostics"] = res.diagnostics
    out["instance"] = instance_to_dict(instance)
    return _clean(out)


def _write(path, data: bytes):
    if path in (None, "-"):
        sys.stdout.buffer.write(data)
    else:
        Path(path).write_bytes(data)


def cmd_solve(args) -> int:
    try:
        text = Path(args.instance).read_text()
    except OSError as exc:
        raise FormatError(f"cannot read {args.instance}: {exc.strerror}") from None
    inst = parse_instance_json(text)
    res = solve_with(args.method, inst)
    doc = json.dumps(result_to_dict(inst, res), indent=2, allow_nan=False) + "\n"
    _write(args.out, doc.encode())
    return EXIT_OK


def cmd_sweep(args) -> int:
    config = load_config(args.config)
    rows = run_sweep(config, threads=args.threads)
    _write(args.out, emit_csv(rows, include_timing=args.timing))
    bad = sum(r.infeasible for r in rows)
    if bad:
        print(f"warning: {bad} infeasible (instance, method) pairs left out of the means",
              file=sys.stderr)
    return EXIT_OK


def cmd_verify(args) -> int:
    if args.trials < 1:
        print("error: --trials must be >= 1", file=sys.stderr)
        return EXIT_INPUT
    names = SUITES if args.suite == "all" else (args.suite,)
    reports = run_suites(names, args.trials, args.seed)
    for r in reports:
        status = "PASS" if r.ok else "FAIL"
        print(f"{r.name:10s} {status}  {r.passed} passed, {r.failed} failed")
        for f in r.failures:
            print(f"    {f}")
    return EXIT_OK if all(r.ok for r in reports) else EXIT_INPUT


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mecalloc",
                                description="Energy-minimal offloading schedules for multi-user MEC.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="solve one instance file")
    s.add_argument("--instance", required=True, help="instance JSON file")
    s.add_argument("--method", required=True, choices=sorted(METHODS))
    s.add_argument("--out", default="-", help="result JSON path (default: stdout)")
    s.set_defaults(func=cmd_solve)

    w = sub.add_parser("sweep", help="run a Monte-Carlo sweep and write CSV")
    w.add_argument("--config", required=True,
                   help="config JSON path, or a shipped config name such as fig5a")
    w.add_argument("--out", default="-", help="CSV path (default: stdout)")
    w.add_argument("--threads", type=int, default=1, help="worker processes")
    w.add_argument("--timing", action="store_true",
                   help="fill mean_walltime_s (makes output machine-dependent)")
    w.set_defaults(func=cmd_sweep)

    v = sub.add_parser("verify", help="run the randomized self-check suites")
    v.add_argument("--suite", default="all", choices=SUITES + ("all",))
    v.add_argument("--trials", type=int, default=100)
    v.add_argument("--seed", type=int, default=0)
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (SizeError, FormatError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
