import json
import shutil
import subprocess
import sys

import jsonschema
import numpy as np
import pytest

from afx.cli import main
from afx.report import REPORT_SCHEMA
from afx.volume_io import LabelVolume, load_volume, save_schema, save_volume
from conftest import intact_tube_spec, minimal_schema, straight_spec


@pytest.fixture(scope="module")
def phantom_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("phantoms")
    spec_file = out / "tube.json"
    spec_file.write_text(straight_spec(name="tube", length=60.0, tears=((30.0, 8.0),)).to_json())
    assert main(["phantom", str(spec_file), "--out", str(out / "set")]) == 0
    return out / "set"


def test_phantom_writes_volume_schema_truth_and_spec(phantom_dir, capsys):
    names = sorted(p.name for p in phantom_dir.iterdir())
    assert names == ["tube.afxv", "tube.schema.txt", "tube.spec.json", "tube.truth.json"]
    truth = json.loads((phantom_dir / "tube.truth.json").read_text())
    assert truth["tears"][0]["arclength"] == 30.0


def test_phantom_nifti_and_suite(tmp_path, capsys):
    assert main(["phantom", "--suite", "2", "--seed", "5", "--out", str(tmp_path),
                 "--format", "nifti"]) == 0
    stems = capsys.readouterr().out.split()
    assert stems == ["suite-5-000", "suite-5-001"]
    assert load_volume(tmp_path / "suite-5-000.nii").data.max() > 0


@pytest.mark.parametrize("argv", [
    ["phantom", "--out", "x"],                              # neither spec nor --suite
    ["phantom", "s.json", "--suite", "2", "--out", "x"],    # both
])
def test_phantom_usage_errors(argv, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(argv) == 2


def test_phantom_bad_spec_file(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["phantom", str(bad), "--out", str(tmp_path / "o")]) == 1
    assert "not JSON" in capsys.readouterr().err


def test_analyze_writes_a_valid_json_report(phantom_dir, tmp_path, capsys):
    out = tmp_path / "r.json"
    rc = main(["analyze", str(phantom_dir / "tube.afxv"), "--schema",
               str(phantom_dir / "tube.schema.txt"), "--json", str(out)])
    assert rc == 0
    assert capsys.readouterr().out == ""            # JSON only unless --text
    report = json.loads(out.read_text())
    jsonschema.validate(report, REPORT_SCHEMA)
    assert report["case_id"] == "tube.afxv"
    assert abs(report["lot"]["arclength_mm"] - 30.0) <= 3.0


def test_analyze_prints_text_by_default(phantom_dir, capsys):
    rc = main(["analyze", str(phantom_dir / "tube.afxv"), "--schema",
               str(phantom_dir / "tube.schema.txt"), "--tlc-warn-pct", "70"])
    assert rc == 0
    text = capsys.readouterr().out
    assert text.startswith("afx clinical report: tube.afxv")
    assert text.count("WARNING: severe hypoperfusion") == 1


def test_analyze_reports_the_failing_stage(tmp_path, capsys):
    save_volume(LabelVolume(np.zeros((5, 5, 5), np.uint8), (1, 1, 1)), tmp_path / "e.afxv")
    save_schema(minimal_schema(), tmp_path / "s.txt")
    assert main(["analyze", str(tmp_path / "e.afxv"), "--schema", str(tmp_path / "s.txt")]) == 1
    assert "stage seeds failed" in capsys.readouterr().err
    (tmp_path / "junk.afxv").write_bytes(b"nope")
    assert main(["analyze", str(tmp_path / "junk.afxv"), "--schema", str(tmp_path / "s.txt")]) == 1
    assert "stage load failed" in capsys.readouterr().err


def test_eval_against_itself(phantom_dir, tmp_path, capsys):
    out = tmp_path / "eval.json"
    rc = main(["eval", "--pred", str(phantom_dir), "--ref", str(phantom_dir),
               "--schema", str(phantom_dir / "tube.schema.txt"), "--json", str(out), "--cases"])
    assert rc == 0
    text = capsys.readouterr().out
    assert "1.0000 ± 0.0000  0.00 ± 0.00" in text
    rec = json.loads(out.read_text())
    assert all(a["dsc"]["mean"] == 1.0 and a["hd95"]["mean"] == 0.0 for a in rec["aggregate"])


def test_eval_lists_unmatched_and_unreadable(phantom_dir, tmp_path, capsys):
    pred, ref = tmp_path / "pred", tmp_path / "ref"
    pred.mkdir()
    ref.mkdir()
    for d in (pred, ref):
        shutil.copy(phantom_dir / "tube.afxv", d)
    shutil.copy(phantom_dir / "tube.afxv", pred / "extra.afxv")
    (pred / "broken.afxv").write_bytes(b"xx")
    (ref / "broken.afxv").write_bytes(b"xx")
    schema = str(phantom_dir / "tube.schema.txt")
    assert main(["eval", "--pred", str(pred), "--ref", str(ref), "--schema", schema]) == 1
    cap = capsys.readouterr()
    assert "unmatched: extra.afxv" in cap.err
    assert "unreadable: broken.afxv" in cap.err
    assert "DSC" in cap.out                         # the matched case is still tabulated


def test_eval_empty_intersection_and_missing_dir(phantom_dir, tmp_path, capsys):
    schema = str(phantom_dir / "tube.schema.txt")
    empty = tmp_path / "empty"
    empty.mkdir()
    assert main(["eval", "--pred", str(empty), "--ref", str(phantom_dir), "--schema", schema]) == 1
    assert "no case filenames" in capsys.readouterr().err
    assert main(["eval", "--pred", str(tmp_path / "nope"), "--ref", str(phantom_dir),
                 "--schema", schema]) == 2


def test_eval_with_threads(phantom_dir, tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("AFX_THREADS", "3")
    schema = str(phantom_dir / "tube.schema.txt")
    assert main(["eval", "--pred", str(phantom_dir), "--ref", str(phantom_dir),
                 "--schema", schema]) == 0


def test_argparse_usage_errors(capsys):
    with pytest.raises(SystemExit) as info:
        main(["analyze", "v.afxv"])                 # --schema missing
    assert info.value.code == 2
    with pytest.raises(SystemExit) as info:
        main([])
    assert info.value.code == 2


def test_console_entry_point(tmp_path):
    vol_dir = tmp_path / "o"
    r = subprocess.run([sys.executable, "-m", "afx.cli", "phantom", "--out", str(vol_dir)],
                       capture_output=True, text=True)
    assert r.returncode == 2 and "afx: error" in r.stderr
    r = subprocess.run([sys.executable, "-m", "afx.cli", "--version"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.startswith("afx ")


def test_intact_phantom_round_trip_through_the_cli(tmp_path, capsys):
    spec = tmp_path / "intact.json"
    spec.write_text(intact_tube_spec(length=40.0).to_json())
    assert main(["phantom", str(spec), "--out", str(tmp_path)]) == 0
    assert main(["analyze", str(tmp_path / "intact-tube.afxv"), "--schema",
                 str(tmp_path / "intact-tube.schema.txt")]) == 0
    assert "LOT: no entry tear detected" in capsys.readouterr().out
