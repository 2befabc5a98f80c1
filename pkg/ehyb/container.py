"""EHYB 二进制容器（小端，CRC32 校验）

布局: b"EHYB" | u32 版本 | u32 τ | payload | u32 CRC32(payload)
payload: u32 字段数，每个字段 = u16 名称长度 + 名称 + u8 类型码 + u64 元素个数 + 原始数据
可选字段 source_digest（源矩阵三元组 CRC32）供只有容器时的 verify 使用
"""
import os
import struct
import zlib
from typing import BinaryIO, Dict, Union

import numpy as np

from .errors import (
    ContainerChecksumError,
    ContainerError,
    ContainerMagicError,
    ContainerTruncatedError,
    ContainerVersionError,
)
from .format import EhybMatrix, EhybParams, ReorderPlan

MAGIC = b'EHYB'
VERSION = 1
_HEADER = struct.Struct('<4sII')
_CRC = struct.Struct('<I')

_DTYPE_CODES = {
    1: np.dtype('<u2'),
    2: np.dtype('<u4'),
    3: np.dtype('<i8'),
    4: np.dtype('<f4'),
    5: np.dtype('<f8'),
}
_CODE_OF = {(dt.kind, dt.itemsize): code for code, dt in _DTYPE_CODES.items()}

_ARRAY_FIELDS = (
    'val_ell', 'col_ell', 'position_ell', 'width_ell', 'row_width_ell',
    'val_er', 'col_er', 'position_er', 'width_er', 'row_width_er',
)
_PLAN_FIELDS = ('reorder_table', 'inverse_table', 'arrange_table', 'y_idx_er', 'part_boundary')


def _encode_array(name: str, arr: np.ndarray) -> bytes:
    arr = np.ascontiguousarray(arr)
    code = _CODE_OF[(arr.dtype.kind, arr.dtype.itemsize)]
    dtype = _DTYPE_CODES[code]
    raw = name.encode('utf-8')
    return (struct.pack('<H', len(raw)) + raw + struct.pack('<BQ', code, arr.size)
            + arr.astype(dtype, copy=False).tobytes())


def _encode_payload(e: EhybMatrix) -> bytes:
    p = e.params
    scalars = np.array([p.K, p.n_parts, p.vec_cache_size, p.warp_size,
                        e.plan.dimension, e.plan.padded_dimension, e.nnz], dtype='<i8')
    fields = [('scalars', scalars)]
    fields += [(name, getattr(e.plan, name)) for name in _PLAN_FIELDS]
    fields += [(name, getattr(e, name)) for name in _ARRAY_FIELDS]
    if e.source_digest is not None:
        fields.append(('source_digest', np.array([e.source_digest], dtype='<i8')))
    chunks = [struct.pack('<I', len(fields))]
    for name, arr in fields:
        if arr.dtype.kind == 'i':
            arr = arr.astype('<i8')
        chunks.append(_encode_array(name, arr))
    return b''.join(chunks)


def write_ehyb_container(m: EhybMatrix, sink: Union[str, os.PathLike, BinaryIO]) -> None:
    """写出容器；sink 可为路径或二进制流"""
    m.validate()
    payload = _encode_payload(m)
    blob = _HEADER.pack(MAGIC, VERSION, m.params.tau) + payload + _CRC.pack(zlib.crc32(payload))
    if isinstance(sink, (str, os.PathLike)):
        with open(sink, 'wb') as f:
            f.write(blob)
    else:
        sink.write(blob)


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise ContainerTruncatedError(f"payload ends at byte {len(self.buf)}, needed {self.pos + n}")
        chunk = self.buf[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def _decode_payload(payload: bytes) -> Dict[str, np.ndarray]:
    r = _Reader(payload)
    (count,) = r.unpack('<I')
    fields: Dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = r.unpack('<H')
        name = r.take(name_len).decode('utf-8')
        code, size = r.unpack('<BQ')
        if code not in _DTYPE_CODES:
            raise ContainerError(f"unknown dtype code {code} for field {name!r}")
        dtype = _DTYPE_CODES[code]
        fields[name] = np.frombuffer(r.take(size * dtype.itemsize), dtype=dtype).astype(dtype.newbyteorder('='))
    if r.pos != len(payload):
        raise ContainerError(f"{len(payload) - r.pos} trailing payload bytes")
    return fields


def read_ehyb_container(source: Union[str, os.PathLike, BinaryIO, bytes]) -> EhybMatrix:
    """读取容器；先校验魔数/版本/CRC，再解码字段"""
    if isinstance(source, (bytes, bytearray)):
        blob = bytes(source)
    elif isinstance(source, (str, os.PathLike)):
        with open(source, 'rb') as f:
            blob = f.read()
    else:
        blob = source.read()

    if len(blob) < _HEADER.size + _CRC.size:
        raise ContainerTruncatedError(f"container of {len(blob)} bytes is shorter than its header")
    magic, version, tau = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise ContainerMagicError(f"bad magic {magic!r}")
    if version != VERSION:
        raise ContainerVersionError(f"container version {version}, reader supports {VERSION}")
    payload = blob[_HEADER.size:-_CRC.size]
    (stored_crc,) = _CRC.unpack(blob[-_CRC.size:])
    if zlib.crc32(payload) != stored_crc:
        raise ContainerChecksumError("CRC32 mismatch: container is corrupted")

    fields = _decode_payload(payload)
    missing = [n for n in ('scalars',) + _PLAN_FIELDS + _ARRAY_FIELDS if n not in fields]
    if missing:
        raise ContainerTruncatedError(f"missing fields: {', '.join(missing)}")
    K, n_parts, vec, warp, dimension, padded, nnz = (int(v) for v in fields['scalars'])
    params = EhybParams(K, n_parts, vec, int(tau), warp)
    plan = ReorderPlan(dimension, padded, *(fields[n] for n in _PLAN_FIELDS))
    # source_digest 可选，旧文件没有该字段
    digest = fields.get('source_digest')
    e = EhybMatrix(params, plan, nnz, *(fields[n] for n in _ARRAY_FIELDS),
                   source_digest=int(digest[0]) if digest is not None and digest.size == 1 else None)
    e.validate()
    return e
