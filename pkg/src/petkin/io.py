"""File formats: self-describing float32 array files, CSV tables and PGM previews."""

from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"PKARR\x00\x00\x01"
DTYPE = "f32le"


class ArrayFormatError(ValueError):
    pass


def canonical_json(obj) -> str:
    """Deterministic JSON text (sorted keys, fixed separators, ``inf`` as a string)."""
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2, ensure_ascii=False)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        if np.isnan(value):
            return "nan"
        if np.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def encode_array(array, meta: dict | None = None) -> bytes:
    array = np.ascontiguousarray(array, dtype="<f4")
    header = {"dims": list(array.shape), "dtype": DTYPE, "order": "row-major", "meta": _jsonable(meta or {})}
    text = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return MAGIC + struct.pack("<I", len(text)) + text + array.tobytes(order="C")


def decode_array(blob: bytes) -> tuple[np.ndarray, dict]:
    if blob[:8] != MAGIC:
        raise ArrayFormatError("bad magic: not an array file")
    if len(blob) < 12:
        raise ArrayFormatError("truncated header")
    (n,) = struct.unpack("<I", blob[8:12])
    try:
        header = json.loads(blob[12 : 12 + n].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ArrayFormatError(f"unreadable header: {exc}") from exc
    if header.get("dtype") != DTYPE or header.get("order") != "row-major":
        raise ArrayFormatError(f"unsupported layout {header.get('dtype')}/{header.get('order')}")
    dims = [int(d) for d in header["dims"]]
    payload = blob[12 + n :]
    expected = int(np.prod(dims, dtype=np.int64)) * 4
    if len(payload) != expected:
        raise ArrayFormatError(f"payload is {len(payload)} bytes, header implies {expected}")
    array = np.frombuffer(payload, dtype="<f4").reshape(dims).astype(np.float32)
    return array, header.get("meta", {})


def write_array(path, array, meta: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_array(array, meta))
    return path


def read_array(path) -> tuple[np.ndarray, dict]:
    return decode_array(Path(path).read_bytes())


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(canonical_json(obj) + "\n", encoding="utf-8")
    return path


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, quoting=csv.QUOTE_MINIMAL, lineterminator="\r\n")
        writer.writerow(header)
        writer.writerows(rows)
    return path


def append_csv(path, rows) -> None:
    with Path(path).open("a", newline="", encoding="utf-8") as fh:
        csv.writer(fh, quoting=csv.QUOTE_MINIMAL, lineterminator="\r\n").writerows(rows)


def read_csv(path) -> list[dict]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def write_pgm(path, image, vmin: float | None = None, vmax: float | None = None) -> Path:
    """Binary P5 PGM with 16-bit samples scaled linearly to [0, 65535]."""
    image = np.asarray(image, dtype=float)
    if image.ndim != 2:
        raise ValueError("PGM previews need a 2-D image")
    lo = float(np.min(image)) if vmin is None else vmin
    hi = float(np.max(image)) if vmax is None else vmax
    span = hi - lo
    scaled = np.zeros_like(image) if span <= 0 else (np.clip(image, lo, hi) - lo) / span
    data = np.round(scaled * 65535).astype(">u2")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    h, w = image.shape
    path.write_bytes(f"P5\n{w} {h}\n65535\n".encode("ascii") + data.tobytes())
    return path


def read_pgm(path) -> np.ndarray:
    blob = Path(path).read_bytes()
    parts = blob.split(b"\n", 3)
    if parts[0] != b"P5":
        raise ValueError("not a binary PGM")
    w, h = (int(v) for v in parts[1].split())
    return np.frombuffer(parts[3], dtype=">u2").reshape(h, w).astype(np.uint16)
