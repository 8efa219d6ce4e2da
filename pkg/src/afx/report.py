"""Pipeline orchestration and the clinical report (JSON and text renderings)."""
from __future__ import annotations

import hashlib
import json
import os
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field

import numpy as np

from afx import __version__
from afx.errors import AfxError, StageError, ZoneError
from afx.features.bvi import BviRecord, classify_bvi
from afx.features.profile import (FLAR_RISK_PCT, TLC_WARN_PCT, flagged_intervals,
                                  luminal_profile, max_flar, min_tlc)
from afx.features.seeds import aortic_lumen, derive_seeds
from afx.features.tears import MIN_TEAR_AREA_MM2, TearCandidate, detect_tears, primary_entry_tear
from afx.features.zones import build_zone_map, lumen_shell, ostium_arclengths
from afx.geometry.centerline import VoxelGraph, extract_centerline
from afx.geometry.distance import distance_transform
from afx.volume_io import LabelSchema, LabelVolume, encode_raw, load_schema, load_volume

REPORT_VERSION = 1


def worker_count() -> int:
    """Worker cap from ``AFX_THREADS`` (default 1; invalid values fall back to 1)."""
    try:
        return max(1, int(os.environ.get("AFX_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class AnalysisOptions:
    section_step_mm: float = 1.0
    min_tear_area: float = MIN_TEAR_AREA_MM2
    tlc_warn_pct: float = TLC_WARN_PCT
    flar_risk_pct: float = FLAR_RISK_PCT
    descending_start_mm: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ClinicalReport:
    case_id: str
    status: str                      # complete | degraded
    centerline_length_mm: float
    zone_boundaries_mm: list | None
    lot: dict
    tlc: dict
    flar: dict
    bvi: list                        # BviRecord
    secondary_tears: list            # TearCandidate
    notes: list = field(default_factory=list)
    provenance: dict = field(default_factory=dict)
    timings_ms: dict = field(default_factory=dict)

    def to_dict(self, timings: bool = True) -> dict:
        d = {
            "report_version": REPORT_VERSION,
            "case_id": self.case_id,
            "status": self.status,
            "centerline_length_mm": self.centerline_length_mm,
            "zone_boundaries_mm": self.zone_boundaries_mm,
            "lot": self.lot,
            "tlc": self.tlc,
            "flar": self.flar,
            "bvi": [b.to_dict() for b in self.bvi],
            "secondary_tears": [t.to_dict() for t in self.secondary_tears],
            "notes": list(self.notes),
            "provenance": self.provenance,
        }
        if timings:
            d["timings_ms"] = self.timings_ms
        return d


class _Stages:
    def __init__(self):
        self.timings: dict[str, float] = {}

    @contextmanager
    def __call__(self, name: str):
        t0 = time.perf_counter()
        try:
            yield
        except StageError:
            raise
        except (AfxError, ValueError, MemoryError) as exc:
            raise StageError(name, exc) from exc
        finally:
            self.timings[name] = round(1000.0 * (time.perf_counter() - t0), 3)


def _tear_lot(tear: TearCandidate | None, zones_ok: bool) -> dict:
    if tear is None:
        return {"status": "none-detected", "zone": None, "arclength_mm": None,
                "contact_area_mm2": None}
    return {
        "status": "found" if zones_ok else "zones-unavailable",
        "zone": tear.zone,
        "arclength_mm": tear.arclength,
        "contact_area_mm2": tear.contact_area,
    }


def analyze_volume(volume: LabelVolume, schema: LabelSchema,
                   options: AnalysisOptions | None = None, *, case_id: str = "case",
                   input_digest: str | None = None, workers: int | None = None) -> ClinicalReport:
    """Run the full feature pipeline on an in-memory volume."""
    options = options or AnalysisOptions()
    workers = worker_count() if workers is None else workers
    stage = _Stages()
    notes = []
    with stage("validate"):
        schema.validate_volume(volume)
        if input_digest is None:
            input_digest = hashlib.sha256(encode_raw(volume)).hexdigest()
    with stage("seeds"):
        lumen = aortic_lumen(volume, schema)
        graph = VoxelGraph(lumen.bits, lumen.spacing)
        dt = distance_transform(lumen)
        seeds = derive_seeds(lumen, graph, dt)
    with stage("centerline"):
        cl = extract_centerline(lumen, seeds.root, seeds.distal, step=options.section_step_mm,
                                dt=dt, graph=graph)
    zones = None
    with stage("zones"):
        shell = lumen_shell(np.isin(volume.data, schema.lumen_labels))
        ostia = ostium_arclengths(volume, schema, cl, shell)
        try:
            zones = build_zone_map(volume, schema, cl, ostia)
        except ZoneError as exc:
            notes.append(f"zone map unavailable: {exc}")
    with stage("profile"):
        profile = luminal_profile(volume, schema, cl, workers=workers)
        tlc_pct, tlc_s, warning = min_tlc(profile, options.tlc_warn_pct)
        if options.descending_start_mm is not None:
            desc = float(options.descending_start_mm)
        elif zones is not None:
            desc = zones.boundaries[3]
        else:
            desc = 0.0
            notes.append("descending start defaulted to 0 mm (no zone map)")
        flar_pct, flar_s, risk = max_flar(profile, desc, options.flar_risk_pct)
        intervals = flagged_intervals(profile, options.tlc_warn_pct)
    with stage("tears"):
        tears = detect_tears(volume, schema, cl, options.min_tear_area, zones)
        primary = primary_entry_tear(tears)
    with stage("bvi"):
        bvi = classify_bvi(volume, schema, cl, shell)
    secondary = [t for t in tears if t is not primary]
    status = "complete" if zones is not None else "degraded"
    return ClinicalReport(
        case_id=case_id,
        status=status,
        centerline_length_mm=cl.length,
        zone_boundaries_mm=None if zones is None else list(zones.boundaries),
        lot=_tear_lot(primary, zones is not None),
        tlc={"min_pct": tlc_pct, "arclength_mm": tlc_s, "warning": bool(warning),
             "warn_threshold_pct": options.tlc_warn_pct,
             "flagged_intervals_mm": [list(iv) for iv in intervals]},
        flar={"max_pct": flar_pct, "arclength_mm": flar_s, "risk_flag": bool(risk),
              "risk_threshold_pct": options.flar_risk_pct, "descending_start_mm": desc},
        bvi=bvi,
        secondary_tears=secondary,
        notes=notes,
        provenance={"tool": "afx", "tool_version": __version__,
                    "parameters": options.to_dict(),
                    "branch_ostia_mm": {k: ostia[k] for k in sorted(ostia)},
                    "input_sha256": input_digest},
        timings_ms=stage.timings,
    )


def analyze(volume_path, schema_path, options: AnalysisOptions | None = None,
            workers: int | None = None) -> ClinicalReport:
    """Load ``volume_path`` and ``schema_path`` and analyze them."""
    with _Stages()("load"):
        with open(volume_path, "rb") as fh:
            digest = hashlib.sha256(fh.read()).hexdigest()
        volume = load_volume(volume_path)
        schema = load_schema(schema_path)
    case_id = os.path.basename(str(volume_path))
    return analyze_volume(volume, schema, options, case_id=case_id, input_digest=digest,
                          workers=workers)


# ----------------------------------------------------------------- render

def _fmt(x) -> str:
    return "n/a" if x is None else f"{x:.2f}"


def render_text(report: ClinicalReport) -> str:
    lines = [f"afx clinical report: {report.case_id} ({report.status})"]
    lot = report.lot
    if lot["status"] == "none-detected":
        lines.append("LOT: no entry tear detected")
    else:
        zone = "unavailable" if lot["zone"] is None else str(lot["zone"])
        lines.append(f"LOT: zone {zone} at {_fmt(lot['arclength_mm'])} mm "
                     f"(contact area {_fmt(lot['contact_area_mm2'])} mm2)")
    tlc = report.tlc
    lines.append(f"TLC: minimum {_fmt(tlc['min_pct'])}% at {_fmt(tlc['arclength_mm'])} mm")
    if tlc["warning"]:
        lines.append(f"WARNING: severe hypoperfusion risk, minimum TLC {_fmt(tlc['min_pct'])}% "
                     f"below {_fmt(tlc['warn_threshold_pct'])}%")
    for a, b in tlc["flagged_intervals_mm"]:
        lines.append(f"  flagged interval: {_fmt(a)} to {_fmt(b)} mm")
    flar = report.flar
    lines.append(f"FLAR: maximum {_fmt(flar['max_pct'])}% at {_fmt(flar['arclength_mm'])} mm "
                 f"(scanned from {_fmt(flar['descending_start_mm'])} mm)")
    if flar["risk_flag"]:
        lines.append(f"WARNING: late adverse event risk, maximum FLAR {_fmt(flar['max_pct'])}% "
                     f"above {_fmt(flar['risk_threshold_pct'])}%")
    lines.append("BVI:" if report.bvi else "BVI: no branches in schema")
    for b in report.bvi:
        ev = (f"flap in branch={'yes' if b.flap_extends else 'no'}, "
              f"FL supply={'yes' if b.fl_supplies else 'no'}, "
              f"TL supply={'yes' if b.tl_supplies else 'no'}")
        note = f" ({'; '.join(b.notes)})" if b.notes else ""
        lines.append(f"  {b.branch_name}: {b.involvement} [{ev}]{note}")
    if report.secondary_tears:
        lines.append("Secondary tears:")
        for t in report.secondary_tears:
            zone = "n/a" if t.zone is None else str(t.zone)
            lines.append(f"  {_fmt(t.arclength)} mm, zone {zone}, area {_fmt(t.contact_area)} mm2")
    for n in report.notes:
        lines.append(f"note: {n}")
    return "\n".join(lines) + "\n"


def render_report(report: ClinicalReport, fmt: str = "json", timings: bool = True) -> bytes:
    if fmt == "json":
        return (json.dumps(report.to_dict(timings=timings), indent=2) + "\n").encode()
    if fmt == "text":
        return render_text(report).encode()
    raise ValueError(f"unknown report format {fmt!r}")


# ------------------------------------------------------------ JSON schema

_NUM = {"type": "number"}
_OPT_NUM = {"type": ["number", "null"]}
_ZONE = {"type": ["integer", "null"], "minimum": 0, "maximum": 11}

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "afx clinical report",
    "type": "object",
    "required": ["report_version", "case_id", "status", "centerline_length_mm",
                 "zone_boundaries_mm", "lot", "tlc", "flar", "bvi", "secondary_tears",
                 "notes", "provenance"],
    "additionalProperties": False,
    "properties": {
        "report_version": {"const": REPORT_VERSION},
        "case_id": {"type": "string"},
        "status": {"enum": ["complete", "degraded"]},
        "centerline_length_mm": _NUM,
        "zone_boundaries_mm": {"oneOf": [
            {"type": "null"},
            {"type": "array", "items": _NUM, "minItems": 12, "maxItems": 12},
        ]},
        "lot": {
            "type": "object",
            "required": ["status", "zone", "arclength_mm", "contact_area_mm2"],
            "additionalProperties": False,
            "properties": {
                "status": {"enum": ["found", "none-detected", "zones-unavailable"]},
                "zone": _ZONE,
                "arclength_mm": _OPT_NUM,
                "contact_area_mm2": _OPT_NUM,
            },
        },
        "tlc": {
            "type": "object",
            "required": ["min_pct", "arclength_mm", "warning", "warn_threshold_pct",
                         "flagged_intervals_mm"],
            "additionalProperties": False,
            "properties": {
                "min_pct": {"type": "number", "minimum": 0, "maximum": 100},
                "arclength_mm": _NUM,
                "warning": {"type": "boolean"},
                "warn_threshold_pct": _NUM,
                "flagged_intervals_mm": {"type": "array", "items": {
                    "type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}},
            },
        },
        "flar": {
            "type": "object",
            "required": ["max_pct", "arclength_mm", "risk_flag", "risk_threshold_pct",
                         "descending_start_mm"],
            "additionalProperties": False,
            "properties": {
                "max_pct": {"type": "number", "minimum": 0, "maximum": 100},
                "arclength_mm": _NUM,
                "risk_flag": {"type": "boolean"},
                "risk_threshold_pct": _NUM,
                "descending_start_mm": _NUM,
            },
        },
        "bvi": {"type": "array", "items": {
            "type": "object",
            "required": ["branch", "territory", "involvement", "evidence", "notes"],
            "additionalProperties": False,
            "properties": {
                "branch": {"type": "string"},
                "territory": {"enum": ["arch", "visceral", None]},
                "involvement": {"enum": ["none", "static", "dynamic", "mixed"]},
                "evidence": {
                    "type": "object",
                    "required": ["flap_extends_into_branch", "fl_supplies_branch",
                                 "tl_supplies_branch"],
                    "additionalProperties": False,
                    "properties": {
                        "flap_extends_into_branch": {"type": "boolean"},
                        "fl_supplies_branch": {"type": "boolean"},
                        "tl_supplies_branch": {"type": "boolean"},
                    },
                },
                "notes": {"type": "array", "items": {"type": "string"}},
            },
        }},
        "secondary_tears": {"type": "array", "items": {
            "type": "object",
            "required": ["arclength_mm", "zone", "contact_area_mm2", "contact_faces",
                         "contact_voxels", "centroid_mm"],
            "additionalProperties": False,
            "properties": {
                "arclength_mm": _NUM,
                "zone": _ZONE,
                "contact_area_mm2": _NUM,
                "contact_faces": {"type": "integer", "minimum": 1},
                "contact_voxels": {"type": "integer", "minimum": 2},
                "centroid_mm": {"type": "array", "items": _NUM, "minItems": 3, "maxItems": 3},
            },
        }},
        "notes": {"type": "array", "items": {"type": "string"}},
        "provenance": {
            "type": "object",
            "required": ["tool", "tool_version", "parameters", "branch_ostia_mm", "input_sha256"],
            "properties": {
                "tool": {"const": "afx"},
                "tool_version": {"type": "string"},
                "parameters": {"type": "object"},
                "branch_ostia_mm": {"type": "object", "additionalProperties": _NUM},
                "input_sha256": {"type": "string", "pattern": "^[0-9a-f]{64}$"},
            },
        },
        "timings_ms": {"type": "object", "additionalProperties": _NUM},
    },
}
