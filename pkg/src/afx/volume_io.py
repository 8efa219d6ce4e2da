"""Label volumes, label schemas and their on-disk formats.

Two volume formats are understood:

* the native raw format (magic ``AFXV``), little-endian::

      4s   magic "AFXV"
      u32  version (= 1)
      u32  nx, ny, nz
      f64  dx, dy, dz          (mm)
      u16  labels[nx*ny*nz]    (x fastest)

* uncompressed single-file NIfTI-1 (``n+1``) with an integer datatype
  (uint8, int16, uint16 or int32).  Only the spacing magnitudes are taken
  from the header; axes are assumed to be aligned with z cranio-caudal.

Schema files hold one entry per line::

    <id> <role> <name> [territory=arch|visceral] [zone=N]

with ``#`` starting a comment.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from afx.errors import (
    FormatError,
    GeometryError,
    SchemaError,
    UnsupportedDatatypeError,
    VolumeWriteError,
)

RAW_MAGIC = b"AFXV"
RAW_VERSION = 1
_RAW_HEADER = struct.Struct("<4sI3I3d")

ROLES = (
    "background",
    "true-lumen",
    "false-lumen",
    "intimal-flap",
    "aortic-wall",
    "branch",
    "other",
)
TERRITORIES = ("arch", "visceral")
MANDATORY_ROLES = ("true-lumen", "false-lumen", "intimal-flap")

# NIfTI-1 datatype codes accepted for label data.
_NIFTI_INT_TYPES = {2: "u1", 4: "i2", 512: "u2", 8: "i4"}
_NIFTI_FLOAT_TYPES = {16, 64, 32, 1792, 128, 2304, 1536}
_NIFTI_HEADER_SIZE = 348


@dataclass(frozen=True)
class VoxelSpacing:
    """Physical voxel size in millimetres along x, y and z."""

    dx: float
    dy: float
    dz: float

    def __post_init__(self):
        for name in ("dx", "dy", "dz"):
            value = float(getattr(self, name))
            if not np.isfinite(value) or value <= 0:
                raise GeometryError(f"voxel spacing {name}={value} must be positive")
            object.__setattr__(self, name, value)

    def as_array(self) -> np.ndarray:
        return np.array([self.dx, self.dy, self.dz], dtype=np.float64)

    @property
    def voxel_volume(self) -> float:
        return self.dx * self.dy * self.dz

    def __iter__(self):
        return iter((self.dx, self.dy, self.dz))


class LabelVolume:
    """Immutable 3D label grid indexed ``data[i, j, k]`` (x, y, z).

    Voxel ``(i, j, k)`` has its centre at ``(i*dx, j*dy, k*dz)`` mm.
    """

    __slots__ = ("data", "spacing")

    def __init__(self, data, spacing):
        arr = np.asarray(data)
        if arr.ndim != 3:
            raise GeometryError(f"label volume must be 3D, got shape {arr.shape}")
        if not np.issubdtype(arr.dtype, np.integer):
            raise UnsupportedDatatypeError(f"label data must be integer, got {arr.dtype}")
        if arr.size and arr.min() < 0:
            raise FormatError("label data contains negative values")
        if not isinstance(spacing, VoxelSpacing):
            spacing = VoxelSpacing(*spacing)
        arr = np.array(arr, copy=True)
        arr.flags.writeable = False
        self.data = arr
        self.spacing = spacing

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(int(n) for n in self.data.shape)

    def mask(self, label_ids: Iterable[int]):
        from afx.geometry import VoxelMask

        ids = np.fromiter((int(i) for i in label_ids), dtype=np.int64)
        return VoxelMask(np.isin(self.data, ids), self.spacing)

    def with_data(self, data) -> "LabelVolume":
        return LabelVolume(data, self.spacing)

    def __eq__(self, other):
        if not isinstance(other, LabelVolume):
            return NotImplemented
        return (
            self.spacing == other.spacing
            and self.data.shape == other.data.shape
            and np.array_equal(self.data, other.data)
        )

    def __repr__(self):
        return f"LabelVolume(dims={self.dims}, spacing={tuple(self.spacing)})"


@dataclass(frozen=True)
class SchemaEntry:
    label: int
    role: str
    name: str
    territory: str | None = None
    zone: int | None = None


@dataclass(frozen=True)
class LabelSchema:
    entries: tuple[SchemaEntry, ...]
    _by_label: Mapping[int, SchemaEntry] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        entries = tuple(self.entries)
        object.__setattr__(self, "entries", entries)
        by_label = {}
        for e in entries:
            if e.role not in ROLES:
                raise SchemaError(f"label {e.label}: unknown role {e.role!r}")
            if e.label < 0:
                raise SchemaError(f"label id {e.label} is negative")
            if e.role == "background" and e.label != 0:
                raise SchemaError(f"label {e.label}: only id 0 may be background")
            if e.label == 0 and e.role != "background":
                raise SchemaError("label id 0 is reserved for background")
            if e.label in by_label:
                raise SchemaError(f"duplicate label id {e.label}")
            if e.territory is not None and e.territory not in TERRITORIES:
                raise SchemaError(f"label {e.label}: unknown territory {e.territory!r}")
            if e.zone is not None and not 0 <= e.zone <= 11:
                raise SchemaError(f"label {e.label}: zone {e.zone} outside [0, 11]")
            if e.role != "branch" and (e.territory is not None or e.zone is not None):
                raise SchemaError(f"label {e.label}: territory/zone only valid on branches")
            by_label[e.label] = e
        for role in MANDATORY_ROLES:
            n = sum(1 for e in entries if e.role == role)
            if n != 1:
                raise SchemaError(f"schema needs exactly one {role} entry, found {n}")
        object.__setattr__(self, "_by_label", by_label)

    def __getitem__(self, label: int) -> SchemaEntry:
        return self._by_label[label]

    def __contains__(self, label) -> bool:
        return label in self._by_label

    def label_of(self, role: str) -> int:
        """The single label id carrying a mandatory role."""
        for e in self.entries:
            if e.role == role:
                return e.label
        raise SchemaError(f"schema has no {role} entry")

    @property
    def true_lumen(self) -> int:
        return self.label_of("true-lumen")

    @property
    def false_lumen(self) -> int:
        return self.label_of("false-lumen")

    @property
    def flap(self) -> int:
        return self.label_of("intimal-flap")

    @property
    def lumen_labels(self) -> tuple[int, int, int]:
        return (self.true_lumen, self.false_lumen, self.flap)

    @property
    def branches(self) -> tuple[SchemaEntry, ...]:
        return tuple(e for e in self.entries if e.role == "branch")

    def validate_volume(self, volume: LabelVolume) -> None:
        present = np.unique(volume.data)
        unknown = [int(v) for v in present if v != 0 and int(v) not in self._by_label]
        if unknown:
            raise SchemaError(f"volume labels not in schema: {unknown}")

    def relabel(self, mapping: Mapping[int, int]) -> "LabelSchema":
        entries = [
            SchemaEntry(mapping.get(e.label, e.label), e.role, e.name, e.territory, e.zone)
            for e in self.entries
        ]
        return LabelSchema(tuple(entries))

    def subset(self, labels: Iterable[int]) -> "LabelSchema":
        keep = set(labels) | set(self.lumen_labels)
        return LabelSchema(tuple(e for e in self.entries if e.label in keep))

    def to_text(self) -> str:
        lines = []
        for e in self.entries:
            parts = [str(e.label), e.role, e.name]
            if e.territory is not None:
                parts.append(f"territory={e.territory}")
            if e.zone is not None:
                parts.append(f"zone={e.zone}")
            lines.append(" ".join(parts))
        return "\n".join(lines) + "\n"


def parse_schema(text: str) -> LabelSchema:
    entries = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        if len(tokens) < 3:
            raise SchemaError(f"line {lineno}: expected '<id> <role> <name>'")
        try:
            label = int(tokens[0])
        except ValueError:
            raise SchemaError(f"line {lineno}: label id {tokens[0]!r} is not an integer") from None
        territory = zone = None
        for opt in tokens[3:]:
            key, sep, value = opt.partition("=")
            if not sep:
                raise SchemaError(f"line {lineno}: malformed option {opt!r}")
            if key == "territory":
                territory = value
            elif key == "zone":
                try:
                    zone = int(value)
                except ValueError:
                    raise SchemaError(f"line {lineno}: zone {value!r} is not an integer") from None
            else:
                raise SchemaError(f"line {lineno}: unknown option {key!r}")
        entries.append(SchemaEntry(label, tokens[1], tokens[2], territory, zone))
    return LabelSchema(tuple(entries))


def load_schema(path) -> LabelSchema:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise SchemaError(f"cannot read schema {path}: {exc}") from exc
    return parse_schema(text)


def save_schema(schema: LabelSchema, path) -> None:
    try:
        Path(path).write_text(schema.to_text())
    except OSError as exc:
        raise VolumeWriteError(f"cannot write schema {path}: {exc}") from exc


# --------------------------------------------------------------------------- raw

def encode_raw(vol: LabelVolume) -> bytes:
    if vol.data.size and int(vol.data.max()) > 0xFFFF:
        raise VolumeWriteError("raw format stores u16 labels; maximum label exceeds 65535")
    header = _RAW_HEADER.pack(RAW_MAGIC, RAW_VERSION, *vol.dims, *vol.spacing)
    payload = np.asarray(vol.data, dtype="<u2").tobytes(order="F")
    return header + payload


def decode_raw(buf: bytes) -> LabelVolume:
    if len(buf) < _RAW_HEADER.size:
        raise FormatError("raw volume truncated inside header")
    magic, version, nx, ny, nz, dx, dy, dz = _RAW_HEADER.unpack_from(buf)
    if magic != RAW_MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != RAW_VERSION:
        raise FormatError(f"unsupported raw version {version}")
    n = nx * ny * nz
    expected = _RAW_HEADER.size + 2 * n
    if len(buf) != expected:
        raise FormatError(f"raw payload size {len(buf)} != expected {expected}")
    spacing = VoxelSpacing(dx, dy, dz)
    data = np.frombuffer(buf, dtype="<u2", offset=_RAW_HEADER.size, count=n)
    return LabelVolume(data.reshape((nx, ny, nz), order="F"), spacing)


# ------------------------------------------------------------------------- nifti

def _nifti_endian(buf: bytes) -> str:
    for endian in ("<", ">"):
        if struct.unpack_from(endian + "i", buf, 0)[0] == _NIFTI_HEADER_SIZE:
            return endian
    raise FormatError("not a NIfTI-1 file (sizeof_hdr != 348)")


def decode_nifti(buf: bytes) -> LabelVolume:
    if buf[:2] == b"\x1f\x8b":
        raise FormatError("compressed NIfTI is not supported")
    if len(buf) < _NIFTI_HEADER_SIZE:
        raise FormatError("file too short for a NIfTI-1 header")
    e = _nifti_endian(buf)
    magic = buf[344:348]
    if magic != b"n+1\x00":
        raise FormatError(f"unsupported NIfTI magic {magic!r} (single-file NIfTI-1 only)")
    dim = struct.unpack_from(e + "8h", buf, 40)
    datatype, bitpix = struct.unpack_from(e + "2h", buf, 70)
    pixdim = struct.unpack_from(e + "8f", buf, 76)
    vox_offset, scl_slope, scl_inter = struct.unpack_from(e + "3f", buf, 108)

    ndim = dim[0]
    if not 3 <= ndim <= 7:
        raise FormatError(f"NIfTI dim[0]={ndim}; a 3D volume is required")
    if any(d != 1 for d in dim[4 : ndim + 1]):
        raise FormatError(f"NIfTI dims {dim[1:ndim + 1]} are not a single 3D volume")
    nx, ny, nz = dim[1:4]
    if min(nx, ny, nz) < 1:
        raise FormatError(f"NIfTI dims {dim[1:4]} must be positive")
    if datatype in _NIFTI_FLOAT_TYPES:
        raise UnsupportedDatatypeError(f"NIfTI datatype {datatype} is floating point")
    if datatype not in _NIFTI_INT_TYPES:
        raise UnsupportedDatatypeError(f"NIfTI datatype {datatype} not supported")
    if scl_slope not in (0.0, 1.0) or scl_inter != 0.0:
        raise UnsupportedDatatypeError("scaled NIfTI data cannot hold labels")
    spacing_vals = pixdim[1:4]
    if any(not np.isfinite(p) or p <= 0 for p in spacing_vals):
        raise GeometryError(f"NIfTI pixdim {spacing_vals} must be positive")

    dtype = np.dtype(e + _NIFTI_INT_TYPES[datatype])
    offset = int(vox_offset)
    n = int(nx) * int(ny) * int(nz)
    if offset < _NIFTI_HEADER_SIZE or offset + n * dtype.itemsize > len(buf):
        raise FormatError("NIfTI voxel payload truncated or vox_offset invalid")
    data = np.frombuffer(buf, dtype=dtype, offset=offset, count=n)
    data = data.reshape((nx, ny, nz), order="F")
    return LabelVolume(data, VoxelSpacing(*(float(p) for p in spacing_vals)))


def encode_nifti(vol: LabelVolume) -> bytes:
    vmax = int(vol.data.max()) if vol.data.size else 0
    if vmax <= 0xFF:
        datatype, code = 2, "u1"
    elif vmax <= 0xFFFF:
        datatype, code = 512, "u2"
    else:
        datatype, code = 8, "i4"
    dtype = np.dtype("<" + code)
    hdr = bytearray(352)
    struct.pack_into("<i", hdr, 0, _NIFTI_HEADER_SIZE)
    struct.pack_into("<8h", hdr, 40, 3, *vol.dims, 1, 1, 1, 1)
    struct.pack_into("<2h", hdr, 70, datatype, dtype.itemsize * 8)
    struct.pack_into("<8f", hdr, 76, 1.0, *vol.spacing, 0.0, 0.0, 0.0, 0.0)
    struct.pack_into("<3f", hdr, 108, 352.0, 1.0, 0.0)
    hdr[123] = 2  # xyzt_units: mm
    struct.pack_into("<2h", hdr, 252, 0, 1)  # qform_code, sform_code
    dx, dy, dz = vol.spacing
    struct.pack_into("<12f", hdr, 280, dx, 0, 0, 0, 0, dy, 0, 0, 0, 0, dz, 0)
    hdr[344:348] = b"n+1\x00"
    return bytes(hdr) + np.asarray(vol.data, dtype=dtype).tobytes(order="F")


# ------------------------------------------------------------------------ public

def read_volume_bytes(buf: bytes) -> LabelVolume:
    if buf[:4] == RAW_MAGIC:
        return decode_raw(buf)
    return decode_nifti(buf)


def load_volume(path) -> LabelVolume:
    """Load a raw (``AFXV``) or NIfTI-1 label volume, detected by content."""
    try:
        buf = Path(path).read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read volume {path}: {exc}") from exc
    return read_volume_bytes(buf)


def save_volume(vol: LabelVolume, path, fmt: str | None = None) -> None:
    """Write ``vol``; the raw format unless ``fmt="nifti"`` or the name ends in ``.nii``."""
    path = Path(path)
    if fmt is None:
        fmt = "nifti" if path.name.endswith(".nii") else "raw"
    if fmt == "raw":
        buf = encode_raw(vol)
    elif fmt == "nifti":
        buf = encode_nifti(vol)
    else:
        raise ValueError(f"unknown volume format {fmt!r}")
    try:
        path.write_bytes(buf)
    except OSError as exc:
        raise VolumeWriteError(f"cannot write volume {path}: {exc}") from exc
