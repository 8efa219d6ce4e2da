import struct

import numpy as np
import pytest

from afx.errors import (FormatError, GeometryError, SchemaError, UnsupportedDatatypeError,
                        VolumeWriteError)
from afx.taxonomy import default_schema
from afx.volume_io import (LabelVolume, VoxelSpacing, decode_nifti, decode_raw, encode_nifti,
                           encode_raw, load_schema, load_volume, parse_schema, save_schema,
                           save_volume)
from builders import nifti_header, random_volume


def test_raw_round_trip_100_random_volumes():
    rng = np.random.default_rng(1234)
    for _ in range(100):
        vol = random_volume(rng)
        back = decode_raw(encode_raw(vol))
        assert back == vol
        assert back.dims == vol.dims
        assert tuple(back.spacing) == tuple(vol.spacing)


def test_raw_file_round_trip(tmp_path):
    rng = np.random.default_rng(5)
    vol = random_volume(rng)
    path = tmp_path / "case.afxv"
    save_volume(vol, path)
    assert load_volume(path) == vol


def test_raw_layout_is_x_fastest():
    vol = LabelVolume(np.arange(24).reshape(2, 3, 4), (1, 1, 1))
    payload = encode_raw(vol)[44:]
    values = np.frombuffer(payload, "<u2")
    assert values[:3].tolist() == [0, 12, 4]      # (0,0,0), (1,0,0), (0,1,0)


@pytest.mark.parametrize("mutate, err", [
    (lambda b: b[:20], FormatError),
    (lambda b: b"XXXX" + b[4:], FormatError),
    (lambda b: b[:-1], FormatError),
    (lambda b: b + b"\x00\x00", FormatError),
    (lambda b: b[:4] + struct.pack("<I", 9) + b[8:], FormatError),
])
def test_raw_rejects_damaged_input(mutate, err):
    buf = encode_raw(LabelVolume(np.ones((3, 3, 3), np.uint8), (1, 1, 1)))
    with pytest.raises(err):
        decode_raw(mutate(buf))


def test_raw_rejects_labels_beyond_u16():
    with pytest.raises(VolumeWriteError):
        encode_raw(LabelVolume(np.full((2, 2, 2), 70000, np.int64), (1, 1, 1)))


def test_volume_validation():
    with pytest.raises(GeometryError):
        LabelVolume(np.zeros((2, 2)), (1, 1, 1))
    with pytest.raises(UnsupportedDatatypeError):
        LabelVolume(np.zeros((2, 2, 2), float), (1, 1, 1))
    with pytest.raises(FormatError):
        LabelVolume(-np.ones((2, 2, 2), int), (1, 1, 1))
    with pytest.raises(GeometryError):
        VoxelSpacing(1.0, 0.0, 1.0)


def test_label_volume_is_immutable():
    vol = LabelVolume(np.zeros((2, 2, 2), np.uint8), (1, 1, 1))
    with pytest.raises(ValueError):
        vol.data[0, 0, 0] = 1


# --------------------------------------------------------------- NIfTI-1

@pytest.mark.parametrize("datatype, code, bitpix", [
    (2, "u1", 8), (4, "i2", 16), (512, "u2", 16), (8, "i4", 32),
])
@pytest.mark.parametrize("endian", ["<", ">"])
def test_nifti_reader_matches_hand_built_header(datatype, code, bitpix, endian):
    dims = (5, 4, 3)
    pixdim = (0.75, 0.8, 2.5)
    data = (np.arange(60) % 7).reshape(dims, order="F")
    payload = data.astype(endian + code).tobytes(order="F")
    vol = decode_nifti(nifti_header(dims, pixdim, datatype, bitpix, endian) + payload)
    assert vol.dims == dims
    assert tuple(vol.spacing) == pytest.approx(pixdim)
    assert np.array_equal(vol.data, data)


def test_nifti_reader_ignores_trailing_unit_dims():
    data = np.ones((2, 3, 4), np.uint8)
    buf = nifti_header((2, 3, 4), (1, 1, 1), 2, 8, ndim=5) + data.tobytes(order="F")
    assert decode_nifti(buf).dims == (2, 3, 4)


def test_nifti_honours_vox_offset():
    data = np.arange(8, dtype=np.uint8).reshape((2, 2, 2), order="F")
    buf = nifti_header((2, 2, 2), (1, 1, 1), 2, 8, vox_offset=400.0)
    buf = buf + b"\xff" * 48 + data.tobytes(order="F")
    assert np.array_equal(decode_nifti(buf).data, data)


@pytest.mark.parametrize("kwargs, err", [
    (dict(datatype=16, bitpix=32), UnsupportedDatatypeError),
    (dict(datatype=128, bitpix=24), UnsupportedDatatypeError),
    (dict(datatype=2, bitpix=8, slope=2.0), UnsupportedDatatypeError),
    (dict(datatype=2, bitpix=8, ndim=4, extra_dims=(3, 1, 1, 1)), FormatError),
    (dict(datatype=2, bitpix=8, magic=b"ni1\x00"), FormatError),
    (dict(datatype=2, bitpix=8, pixdim=(1.0, -1.0, 1.0)), GeometryError),
])
def test_nifti_reader_errors(kwargs, err):
    kw = dict(dims=(2, 2, 2), pixdim=(1.0, 1.0, 1.0))
    kw.update(kwargs)
    buf = nifti_header(**kw) + b"\x00" * 64
    with pytest.raises(err):
        decode_nifti(buf)


def test_nifti_truncated_and_compressed():
    buf = nifti_header((4, 4, 4), (1, 1, 1), 2, 8) + b"\x00" * 10
    with pytest.raises(FormatError):
        decode_nifti(buf)
    with pytest.raises(FormatError):
        decode_nifti(b"\x1f\x8b" + b"\x00" * 400)
    with pytest.raises(FormatError):
        decode_nifti(b"\x00" * 100)


def test_nifti_writer_round_trip(tmp_path):
    rng = np.random.default_rng(77)
    for _ in range(20):
        vol = random_volume(rng)
        back = decode_nifti(encode_nifti(vol))
        assert np.array_equal(back.data, vol.data)
        # pixdim is float32 on disk
        assert np.array_equal(back.spacing.as_array(), vol.spacing.as_array().astype(np.float32))
    path = tmp_path / "case.nii"
    save_volume(vol, path)
    assert np.array_equal(load_volume(path).data, vol.data)      # format detected by content


def test_missing_file(tmp_path):
    with pytest.raises(FormatError):
        load_volume(tmp_path / "absent.afxv")


# ---------------------------------------------------------------- schema

def test_default_schema_round_trips_through_text(tmp_path):
    schema = default_schema()
    assert parse_schema(schema.to_text()) == schema
    save_schema(schema, tmp_path / "s.txt")
    assert load_schema(tmp_path / "s.txt") == schema


def test_default_schema_has_mandatory_roles_and_branches():
    schema = default_schema()
    assert len(set(schema.lumen_labels)) == 3
    zones = {e.name: e.zone for e in schema.branches}
    assert zones["brachiocephalic_trunk"] == 0
    assert zones["left_common_carotid"] == 1
    assert zones["left_subclavian"] == 2


def test_schema_comments_and_options():
    text = """
    # a comment
    0 background bg
    1 true-lumen tl
    2 false-lumen fl   # trailing
    3 intimal-flap flap
    9 branch celiac territory=visceral zone=5
    """
    schema = parse_schema(text)
    assert schema.branches[0].zone == 5
    assert schema.branches[0].territory == "visceral"


@pytest.mark.parametrize("text", [
    "1 true-lumen a\n2 false-lumen b\n",                                # flap missing
    "1 true-lumen a\n2 false-lumen b\n3 intimal-flap c\n3 branch d\n",  # duplicate id
    "1 true-lumen a\n2 false-lumen b\n3 intimal-flap c\n4 vessel d\n",  # unknown role
    "1 true-lumen a\n2 false-lumen b\n3 intimal-flap c\n4 branch d zone=12\n",
    "1 true-lumen a\n2 false-lumen b\n3 intimal-flap c\nx branch d\n",
    "1 true-lumen a\n2 false-lumen b\n3 intimal-flap c\n4 branch d colour=red\n",
    "0 true-lumen a\n2 false-lumen b\n3 intimal-flap c\n",
    "1 true-lumen a\n2 false-lumen b\n3 intimal-flap c zone=1\n",
])
def test_schema_errors(text):
    with pytest.raises(SchemaError):
        parse_schema(text)


def test_validate_volume_rejects_unknown_labels():
    schema = default_schema()
    bad = max(e.label for e in schema.entries) + 1
    vol = LabelVolume(np.full((2, 2, 2), bad), (1, 1, 1))
    with pytest.raises(SchemaError):
        schema.validate_volume(vol)


def test_relabel_is_consistent():
    schema = default_schema()
    mapping = {e.label: e.label + 100 for e in schema.entries if e.label}
    moved = schema.relabel(mapping)
    assert moved.true_lumen == schema.true_lumen + 100
    assert [e.name for e in moved.entries] == [e.name for e in schema.entries]
