"""Command-line entry point: ``afx analyze | phantom | eval``."""
from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from afx import __version__
from afx.errors import AfxError, SpecError, StageError
from afx.volume_io import load_schema, load_volume, save_schema, save_volume

RAW_SUFFIX = ".afxv"
NIFTI_SUFFIX = ".nii"

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2


def _err(msg: str) -> None:
    print(f"afx: error: {msg}", file=sys.stderr)


# ------------------------------------------------------------------ analyze

def cmd_analyze(args) -> int:
    from afx.report import AnalysisOptions, analyze, render_report, worker_count

    opts = AnalysisOptions(
        section_step_mm=args.section_step_mm,
        min_tear_area=args.min_tear_area,
        tlc_warn_pct=args.tlc_warn_pct,
        flar_risk_pct=args.flar_risk_pct,
        descending_start_mm=args.descending_start_mm,
    )
    try:
        report = analyze(args.volume, args.schema, opts, workers=worker_count())
    except StageError as exc:
        _err(f"stage {exc.stage} failed: {type(exc.cause).__name__}: {exc.cause}")
        return EXIT_FAILED
    except AfxError as exc:
        _err(str(exc))
        return EXIT_FAILED
    if args.json:
        Path(args.json).write_bytes(render_report(report, "json"))
    if args.text or not args.json:
        sys.stdout.write(render_report(report, "text").decode())
    return EXIT_OK


# ------------------------------------------------------------------ phantom

def _write_phantom(spec, out: Path, fmt: str) -> str:
    from afx.phantom import generate

    vol, schema, truth = generate(spec)
    stem = spec.name or "phantom"
    suffix = NIFTI_SUFFIX if fmt == "nifti" else RAW_SUFFIX
    save_volume(vol, out / f"{stem}{suffix}", fmt)
    save_schema(schema, out / f"{stem}.schema.txt")
    (out / f"{stem}.truth.json").write_text(json.dumps(truth.to_dict(), indent=2) + "\n")
    (out / f"{stem}.spec.json").write_text(spec.to_json() + "\n")
    return stem


def cmd_phantom(args) -> int:
    from afx.phantom import PhantomSpec
    from afx.phantom.suite import sample_suite

    if (args.spec is None) == (args.suite is None):
        _err("give either a spec file or --suite N")
        return EXIT_USAGE
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        if args.spec is not None:
            text = Path(args.spec).read_text()
            try:
                specs = [PhantomSpec.from_json(text)]
            except json.JSONDecodeError as exc:
                raise SpecError(f"{args.spec}: not JSON: {exc}") from exc
        else:
            specs = sample_suite(args.suite, args.seed)
        for spec in specs:
            print(_write_phantom(spec, out, args.format))
    except (AfxError, OSError, ValueError) as exc:
        _err(str(exc))
        return EXIT_FAILED
    return EXIT_OK


# ---------------------------------------------------------------------- eval

def _volume_files(d: Path) -> dict[str, Path]:
    out = {}
    for p in sorted(d.iterdir()):
        if p.is_file() and p.name.endswith((RAW_SUFFIX, NIFTI_SUFFIX)):
            out[p.name] = p
    return out


def cmd_eval(args) -> int:
    from afx.metrics import aggregate, eval_json, evaluate_case, render_case_rows, render_table
    from afx.report import worker_count

    pred_dir, ref_dir = Path(args.pred), Path(args.ref)
    for d in (pred_dir, ref_dir):
        if not d.is_dir():
            _err(f"not a directory: {d}")
            return EXIT_USAGE
    try:
        schema = load_schema(args.schema)
    except (AfxError, OSError) as exc:
        _err(str(exc))
        return EXIT_FAILED
    pred, ref = _volume_files(pred_dir), _volume_files(ref_dir)
    names = sorted(set(pred) & set(ref))
    problems = [f"unmatched: {n} (only in {pred_dir})" for n in sorted(set(pred) - set(ref))]
    problems += [f"unmatched: {n} (only in {ref_dir})" for n in sorted(set(ref) - set(pred))]
    if not names:
        for p in problems:
            print(p, file=sys.stderr)
        _err("no case filenames are common to both directories")
        return EXIT_FAILED

    def one(name):
        try:
            return name, evaluate_case(load_volume(pred[name]), load_volume(ref[name]), schema), None
        except (AfxError, OSError, ValueError) as exc:
            return name, None, f"unreadable: {name}: {exc}"

    per_case = {}
    workers = worker_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, names))
    else:
        results = [one(n) for n in names]
    for name, rows, problem in results:       # fold in case order
        if problem:
            problems.append(problem)
        else:
            per_case[name] = rows
    for p in problems:
        print(p, file=sys.stderr)
    if not per_case:
        _err("no case could be evaluated")
        return EXIT_FAILED
    agg = aggregate(per_case.values())
    if args.json:
        Path(args.json).write_text(eval_json(per_case, agg, problems))
    if args.cases:
        for name, rows in per_case.items():
            sys.stdout.write(render_case_rows(name, rows))
    sys.stdout.write(render_table(agg))
    return EXIT_FAILED if problems else EXIT_OK


# ------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="afx", description=__doc__)
    p.add_argument("--version", action="version", version=f"afx {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="extract clinical features from a label volume")
    a.add_argument("volume")
    a.add_argument("--schema", required=True)
    a.add_argument("--json", metavar="OUT", help="write the JSON report here")
    a.add_argument("--text", action="store_true",
                   help="also print the text report when --json is given")
    a.add_argument("--section-step-mm", type=float, default=1.0)
    a.add_argument("--min-tear-area", type=float, default=10.0)
    a.add_argument("--tlc-warn-pct", type=float, default=10.0)
    a.add_argument("--flar-risk-pct", type=float, default=60.0)
    a.add_argument("--descending-start-mm", type=float, default=None)
    a.set_defaults(func=cmd_analyze)

    ph = sub.add_parser("phantom", help="write synthetic phantoms with their truth")
    ph.add_argument("spec", nargs="?", help="phantom spec JSON file")
    ph.add_argument("--suite", type=int, metavar="N")
    ph.add_argument("--seed", type=int, default=0)
    ph.add_argument("--out", required=True)
    ph.add_argument("--format", choices=("raw", "nifti"), default="raw")
    ph.set_defaults(func=cmd_phantom)

    e = sub.add_parser("eval", help="Dice / HD95 of predictions against references")
    e.add_argument("--pred", required=True)
    e.add_argument("--ref", required=True)
    e.add_argument("--schema", required=True)
    e.add_argument("--json", metavar="OUT", help="write per-case rows and the table here")
    e.add_argument("--cases", action="store_true", help="print per-case rows")
    e.set_defaults(func=cmd_eval)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
