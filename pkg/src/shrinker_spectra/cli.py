"""Command-line entry point: spectrum, check, audit and sweep subcommands.

Exit status: 0 when every report passes, 1 when an inequality, invariant or
audit fails beyond tolerance, 2 on configuration or numerical errors.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
from typing import Optional

from .errors import SpectralLabError
from .scenario import load_scenario, run_pipeline, run_sweep
from .spectrum import write_eigenvalue_csv

EXIT_PASS, EXIT_FAIL, EXIT_ERROR = 0, 1, 2


def _encode(obj, indent: int = 0) -> str:
    """JSON with floats at 17 significant digits; non-finite floats become null."""
    pad = "  " * (indent + 1)
    end = "  " * indent
    if obj is None or isinstance(obj, bool):
        return {None: "null", True: "true", False: "false"}[obj]
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return format(obj, ".17g") if math.isfinite(obj) else "null"
    if isinstance(obj, str):
        import json

        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{_encode(str(k))}: {_encode(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(_encode(v) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + _encode(v, indent + 1) for v in obj) + "\n" + end + "]"
    if hasattr(obj, "tolist"):
        return _encode(obj.tolist(), indent)
    if hasattr(obj, "item"):
        return _encode(obj.item(), indent)
    raise TypeError(f"cannot encode {type(obj).__name__}")


def write_json(path: str, doc) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_encode(doc) + "\n")


def _fmt(x) -> str:
    return "-" if x is None else f"{x:.6g}"


def summary_text(doc: dict) -> str:
    lines = [f"scenario: {doc['scenario']}  command: {doc['command']}"]
    disc = doc.get("discretization", {})
    if disc:
        lines.append("discretization: " + ", ".join(f"{k}={v}" for k, v in disc.items()))
    spec = doc.get("spectrum")
    if spec:
        vals = spec["values"][:8]
        lines.append(f"eigenvalues from index {spec['first_index']}: " + " ".join(_fmt(v) for v in vals))
        clusters = " ".join(f"{_fmt(c['value'])}(x{c['multiplicity']})" for c in spec["clusters"][:6])
        lines.append(f"clusters: {clusters}")
    for rep in doc.get("reports", []):
        p = rep["params"]
        tag = ",".join(f"{k}={p[k]}" for k in ("k", "A", "h", "delta") if k in p)
        flag = "PASS" if rep["passed"] else "FAIL"
        eq = " equality" if rep["equality"] else ""
        extra = f" implied_next<={_fmt(rep['implied_bound'])}" if rep.get("implied_bound") is not None else ""
        lines.append(f"{flag} {rep['theorem']}[{tag}] lhs={_fmt(rep['lhs'])} rhs={_fmt(rep['rhs'])} "
                     f"slack={_fmt(rep['slack'])}{eq}{extra}")
    for aud in doc.get("audits", []):
        errs = " ".join(f"{e['name']}={e['relative']:.2e}" for e in aud["entries"])
        lines.append(f"{'PASS' if aud['passed'] else 'FAIL'} audit[{aud['label']},k={aud['k']}] {errs} "
                     f"(first degraded: {aud['first_degraded']})")
    for name, item in doc.get("invariants", {}).items():
        if not item["passed"] and item["gated"]:
            lines.append(f"FAIL invariant {name}: error {item['error']:.3e} > {item['tol']:.0e}")
    for row in doc.get("rows", []):
        lines.append(f"res={row['resolution']} lambda=" + " ".join(_fmt(v) for v in row["lambda"])
                     + f" worst_slack={_fmt(row['worst_slack'])} {row['status']}")
    if "orders" in doc:
        lines.append("observed orders: " + " ".join(_fmt(o) for o in doc["orders"]))
        if doc["suspicious_modes"]:
            lines.append(f"suspicious (order < 1.5): modes {doc['suspicious_modes']}")
    for note in doc.get("notes", []):
        lines.append(f"note: {note}")
    s = doc.get("summary", {})
    lines.append("summary: " + ", ".join(f"{k}={v}" for k, v in s.items()))
    return "\n".join(lines) + "\n"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shrinker-spectra",
                                     description="Weighted Newton-operator spectra and universal eigenvalue bounds.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("spectrum", "compute eigenvalues and multiplicity clusters"),
        ("check", "evaluate every applicable eigenvalue inequality"),
        ("audit", "audit the proof-internal moment identities"),
        ("sweep", "refinement sweep with observed convergence orders"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--scenario", required=True, help="scenario JSON file")
        p.add_argument("--k", type=int, default=None, help="override the truncation order")
        p.add_argument("--out", default=None, help="output directory (default: scenario outputs.dir)")
        p.add_argument("--oracle", action="store_true", help="use the analytic sphere spectrum")
        if name == "sweep":
            p.add_argument("--resolutions", type=int, nargs="+", default=None,
                           help="resolutions to sweep (default: scenario resolutions)")
    return parser


def main(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        sc = load_scenario(args.scenario)
        out_dir = args.out or sc.out_dir
        os.makedirs(out_dir, exist_ok=True)
        if args.command == "sweep":
            doc = run_sweep(sc, args.resolutions or sc.resolutions, args.k)
            write_json(os.path.join(out_dir, "report.json"), doc)
            text = summary_text(doc)
            status = doc["summary"]["status"]
        else:
            result = run_pipeline(sc, args.command, args.k, args.oracle)
            write_eigenvalue_csv(os.path.join(out_dir, "eigenvalues.csv"), result.spectrum, result.clusters)
            write_json(os.path.join(out_dir, "report.json"), result.document)
            text = summary_text(result.document)
            status = result.document["summary"]["status"]
        with open(os.path.join(out_dir, "summary.txt"), "w", encoding="utf-8") as fh:
            fh.write(text)
        sys.stdout.write(text)
    except (SpectralLabError, ValueError, OSError) as exc:
        sys.stderr.write(f"error: {type(exc).__name__}: {exc}\n")
        return EXIT_ERROR
    return EXIT_PASS if status == "pass" else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
