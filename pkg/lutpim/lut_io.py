# -*- coding: utf-8 -*-

"""
Binary file format for lookup tables.

A file is a 32-byte little-endian header followed by the raw entries:

    magic "LCLT" | version u16 | kind u8 | b_w u8 | b_a u8 | p u8 | b_o u8 |
    layout u8 | rows u64 | cols u64 | crc32(entries) u32

``kind`` is 0 (packed), 1 (canonical) or 2 (reordering); ``layout`` is 0 for
row-major and 1 for column-major entries. Reordering entries are stored with
their exact width of ``ceil(p * b_w / 8)`` bytes, so the entry section has
exactly the size reported by ``compute_sizes``. The code tables of packed
and canonical LUTs go to a JSON sidecar next to the file.

License: See the LICENSE file.

"""

import hashlib
import json
import os
import struct
import zlib

from dataclasses import dataclass
from functools import wraps

import numpy as np

from .errors import BadMagic, ChecksumMismatch, LutIoError, VersionMismatch
from .lut_builder import (
    KIND_CANONICAL,
    KIND_PACKED,
    KIND_REORDERING,
    LAYOUT_COLUMN,
    LAYOUT_ROW,
    CanonicalLut,
    PackedLut,
    ReorderingLut,
    reordering_entry_bytes,
)
from .quantizer import CodeTable

MAGIC = b"LCLT"
VERSION = 1
HEADER_FMT = "<4sHBBBBBBQQI"
HEADER_SIZE = struct.calcsize(HEADER_FMT)
SIDECAR_SUFFIX = ".tables.json"

KIND_CODES = {KIND_PACKED: 0, KIND_CANONICAL: 1, KIND_REORDERING: 2}
LAYOUT_CODES = {LAYOUT_ROW: 0, LAYOUT_COLUMN: 1}


@dataclass(frozen=True)
class LutHeader:
    version: int
    kind: str
    b_w: int
    b_a: int
    p: int
    b_o: int
    layout: str
    rows: int
    cols: int
    crc: int

    @property
    def entries_size(self):
        return self.rows * self.cols * self.b_o

    def to_dict(self):
        return dict(self.__dict__)


def sidecar_path(path):
    return str(path) + SIDECAR_SUFFIX


def md5sum(filename):
    with open(filename, "rb") as fp:
        data = fp.read()
    return hashlib.md5(data).hexdigest()


def _entries_bytes(lut, layout):
    order = "F" if layout == LAYOUT_COLUMN else "C"
    if lut.kind == KIND_REORDERING:
        width = lut.entry_bytes
        flat = np.asarray(lut.entries, dtype="<u8").ravel(order=order)
        return flat.view(np.uint8).reshape(-1, 8)[:, :width].tobytes()
    return np.asarray(lut.entries, dtype="<i%d" % lut.entry_bytes).tobytes(
        order=order
    )


def _decode_entries(header, data):
    order = "F" if header.layout == LAYOUT_COLUMN else "C"
    shape = (header.rows, header.cols)
    if header.kind == KIND_REORDERING:
        raw = np.frombuffer(data, dtype=np.uint8).reshape(-1, header.b_o)
        padded = np.zeros((raw.shape[0], 8), dtype=np.uint8)
        padded[:, : header.b_o] = raw
        flat = padded.view("<u8").ravel().astype(np.uint64)
    else:
        flat = np.frombuffer(data, dtype="<i%d" % header.b_o)
        flat = flat.astype(flat.dtype.newbyteorder("="))
    return flat.reshape(shape, order=order)


def validate(func):
    """Decorator that validates the target file."""

    @wraps(func)
    def wrapper(lut, path, *args, **kwargs):
        out = func(lut, path, *args, **kwargs)
        if not os.path.exists(path):
            raise LutIoError(path, "target file was not written")
        header = read_header(path)
        with open(path, "rb") as fp:
            fp.seek(HEADER_SIZE)
            data = fp.read()
        if zlib.crc32(data) != header.crc:
            raise ChecksumMismatch(path)
        return out

    return wrapper


@validate
def serialize_lut(lut, path, layout=None):
    layout = layout or lut.layout
    data = _entries_bytes(lut, layout)
    header = struct.pack(
        HEADER_FMT,
        MAGIC,
        VERSION,
        KIND_CODES[lut.kind],
        lut.b_w,
        lut.b_a,
        lut.p,
        lut.entry_bytes,
        LAYOUT_CODES[layout],
        lut.rows,
        lut.cols,
        zlib.crc32(data),
    )
    try:
        with open(path, "wb") as fp:
            fp.write(header)
            fp.write(data)
        if lut.kind != KIND_REORDERING:
            tables = {
                "weight": lut.weight_table.to_dict(),
                "act": lut.act_table.to_dict(),
            }
            with open(sidecar_path(path), "w") as fp:
                json.dump(tables, fp, indent="\t")
    except OSError as err:
        raise LutIoError(path, err.strerror or str(err)) from err


def _read_bytes(path, size=None):
    try:
        with open(path, "rb") as fp:
            return fp.read() if size is None else fp.read(size)
    except OSError as err:
        raise LutIoError(path, err.strerror or str(err)) from err


def _parse_header(path, raw):
    if len(raw) < HEADER_SIZE:
        if raw[:4] != MAGIC[: len(raw[:4])] or not raw:
            raise BadMagic(path, raw[:4])
        raise ChecksumMismatch(path, "file is truncated inside the header")
    fields = struct.unpack(HEADER_FMT, raw[:HEADER_SIZE])
    magic, version, kind, b_w, b_a, p, b_o, layout, rows, cols, crc = fields
    if magic != MAGIC:
        raise BadMagic(path, magic)
    if version != VERSION:
        raise VersionMismatch(path, version, VERSION)
    kinds = {v: k for k, v in KIND_CODES.items()}
    layouts = {v: k for k, v in LAYOUT_CODES.items()}
    if kind not in kinds or layout not in layouts:
        raise ChecksumMismatch(path, "unknown kind or layout in header")
    return LutHeader(
        version=version,
        kind=kinds[kind],
        b_w=b_w,
        b_a=b_a,
        p=p,
        b_o=b_o,
        layout=layouts[layout],
        rows=rows,
        cols=cols,
        crc=crc,
    )


def read_header(path):
    """Read only the header, without loading the entries."""
    return _parse_header(path, _read_bytes(path, HEADER_SIZE))


def _load_tables(path):
    try:
        with open(sidecar_path(path), "r") as fp:
            tables = json.load(fp)
    except OSError as err:
        raise LutIoError(sidecar_path(path), err.strerror or str(err)) from err
    except json.JSONDecodeError as err:
        raise LutIoError(sidecar_path(path), "JSON decoding error: %s" % err.msg)
    return (
        CodeTable.from_dict(tables["weight"]),
        CodeTable.from_dict(tables["act"]),
    )


def deserialize_lut(path):
    raw = _read_bytes(path)
    header = _parse_header(path, raw)
    data = raw[HEADER_SIZE:]
    if len(data) != header.entries_size:
        raise ChecksumMismatch(
            path,
            "expected %d bytes of entries, found %d"
            % (header.entries_size, len(data)),
        )
    if zlib.crc32(data) != header.crc:
        raise ChecksumMismatch(path)

    entries = _decode_entries(header, data)
    if header.kind == KIND_REORDERING:
        if header.b_o != reordering_entry_bytes(header.p, header.b_w):
            raise ChecksumMismatch(path, "reordering entry width does not match p and b_w")
        return ReorderingLut(header.p, header.b_w, entries, layout=header.layout)

    weight_table, act_table = _load_tables(path)
    cls = PackedLut if header.kind == KIND_PACKED else CanonicalLut
    return cls(
        header.p,
        weight_table,
        act_table,
        header.b_o,
        entries,
        layout=header.layout,
    )
