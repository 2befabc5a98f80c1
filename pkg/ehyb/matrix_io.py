"""稀疏矩阵读写（Matrix Market / COO / CSR）"""
import io
import os
from dataclasses import dataclass
from typing import BinaryIO, List, Tuple, Union

import numpy as np
import scipy.io as sio
import scipy.sparse as sp

from .errors import (
    MatrixParseError,
    MatrixValidationError,
    UnsupportedFormatError,
)

Source = Union[bytes, str, BinaryIO, io.TextIOBase]

_SUPPORTED_FIELDS = ('real', 'integer', 'pattern', 'double')
_SUPPORTED_SYMMETRY = ('general', 'symmetric')


@dataclass
class CooMatrix:
    """坐标格式矩阵

    rows/cols 为 0 基索引，按 (row, col) 排序且无重复（构造时合并）。
    """
    n_rows: int
    n_cols: int
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray

    @classmethod
    def from_triplets(cls, n_rows: int, n_cols: int, rows, cols, values,
                      sum_duplicates: bool = True) -> 'CooMatrix':
        """校验坐标、排序并合并重复项"""
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        values = np.asarray(values, dtype=np.float64).ravel()
        if not (rows.size == cols.size == values.size):
            raise MatrixValidationError(
                f"triplet arrays differ in length: {rows.size}/{cols.size}/{values.size}")
        if n_rows < 0 or n_cols < 0:
            raise MatrixValidationError(f"negative shape {n_rows}x{n_cols}")
        if rows.size:
            bad = (rows < 0) | (rows >= n_rows) | (cols < 0) | (cols >= n_cols)
            if bad.any():
                k = int(np.flatnonzero(bad)[0])
                raise MatrixValidationError(
                    f"entry ({rows[k]}, {cols[k]}) outside {n_rows}x{n_cols}")

        # 按线性下标稳定排序，重复项求和（显式 0 保留为结构非零元）
        linear = rows * max(n_cols, 1) + cols
        order = np.argsort(linear, kind='stable')
        linear = linear[order]
        values = values[order]
        if sum_duplicates and linear.size:
            uniq, start = np.unique(linear, return_index=True)
            values = np.add.reduceat(values, start)
            linear = uniq
        width = max(n_cols, 1)
        return cls(n_rows, n_cols, linear // width, linear % width, values)

    @classmethod
    def empty(cls, n_rows: int, n_cols: int) -> 'CooMatrix':
        return cls.from_triplets(n_rows, n_cols, [], [], [])

    @property
    def nnz(self) -> int:
        return int(self.values.size)

    @property
    def is_square(self) -> bool:
        return self.n_rows == self.n_cols

    @property
    def entries(self) -> List[Tuple[int, int, float]]:
        return [(int(r), int(c), float(v))
                for r, c, v in zip(self.rows, self.cols, self.values)]

    def to_dense(self) -> np.ndarray:
        dense = np.zeros((self.n_rows, self.n_cols))
        np.add.at(dense, (self.rows, self.cols), self.values)
        return dense


@dataclass
class CsrMatrix:
    """压缩行格式，作为 SpMV 正确性基准"""
    n_rows: int
    n_cols: int
    row_ptr: np.ndarray
    col_idx: np.ndarray
    values: np.ndarray

    @property
    def nnz(self) -> int:
        return int(self.row_ptr[-1])

    def row_lengths(self) -> np.ndarray:
        return np.diff(self.row_ptr)


def _read_bytes(source: Source) -> bytes:
    """bytes / 文本 / 字节流统一成 bytes"""
    if isinstance(source, (bytes, bytearray)):
        return bytes(source)
    if isinstance(source, str):
        return source.encode('utf-8')
    data = source.read()
    return data.encode('utf-8') if isinstance(data, str) else bytes(data)


def _parse_header(line: str) -> Tuple[str, str]:
    tokens = line.strip().lower().split()
    if len(tokens) != 5 or tokens[0] != '%%matrixmarket' or tokens[1] != 'matrix':
        raise MatrixParseError(f"malformed Matrix Market banner: {line.strip()!r}", 1)
    layout, field, symmetry = tokens[2], tokens[3], tokens[4]
    if layout == 'array':
        raise UnsupportedFormatError("dense 'array' Matrix Market files are not supported")
    if layout != 'coordinate':
        raise MatrixParseError(f"unknown layout {layout!r}", 1)
    if field == 'complex':
        raise UnsupportedFormatError("complex-valued matrices are not supported")
    if field not in _SUPPORTED_FIELDS:
        raise MatrixParseError(f"unknown field {field!r}", 1)
    if symmetry in ('skew-symmetric', 'hermitian'):
        raise UnsupportedFormatError(f"symmetry {symmetry!r} is not supported")
    if symmetry not in _SUPPORTED_SYMMETRY:
        raise MatrixParseError(f"unknown symmetry {symmetry!r}", 1)
    return field, symmetry


def _check_size_line(lines: List[str]) -> Tuple[int, int, int]:
    """找到第一条非注释行并校验 'rows cols nnz'"""
    for line_no, line in enumerate(lines[1:], start=2):
        stripped = line.strip()
        if not stripped or stripped.startswith('%'):
            continue
        parts = stripped.split()
        if len(parts) != 3:
            raise MatrixParseError(f"size line needs 'rows cols nnz', got {stripped!r}", line_no)
        try:
            size = tuple(int(p) for p in parts)
        except ValueError:
            raise MatrixParseError(f"non-integer size line {stripped!r}", line_no)
        if min(size) < 0:
            raise MatrixParseError(f"negative size {stripped!r}", line_no)
        return size
    raise MatrixParseError("missing size line", len(lines))


def parse_matrix_market(source: Source) -> CooMatrix:
    """解析 Matrix Market coordinate 文件

    文件头由本模块校验（错误带行号），条目交给 scipy.io.mmread；
    对称矩阵展开为 general，pattern 取 1.0，重复项求和，显式 0 保留。
    """
    data = _read_bytes(source)
    text = data.decode('utf-8', errors='replace')
    lines = text.splitlines()
    if not lines:
        raise MatrixParseError("empty input", 1)
    field, symmetry = _parse_header(lines[0])
    n_rows, n_cols, _ = _check_size_line(lines)

    # 统一文件头写法（double 记作 real），去掉注释和空行后交给 mmread
    banner = f"%%MatrixMarket matrix coordinate {'real' if field == 'double' else field} {symmetry}"
    body = [ln for ln in data.splitlines()[1:] if ln.strip() and not ln.lstrip().startswith(b'%')]
    try:
        a = sio.mmread(io.BytesIO(b'\n'.join([banner.encode('ascii')] + body) + b'\n'))
    except (ValueError, IndexError, OverflowError) as e:
        message = str(e)
        if any(word in message.lower() for word in ('bound', 'exceed', 'range', 'negative')):
            raise MatrixValidationError(f"entry outside declared {n_rows}x{n_cols}: {message}")
        raise MatrixParseError(f"bad entry section: {message}")
    a = sp.coo_matrix(a)
    return CooMatrix.from_triplets(n_rows, n_cols, a.row, a.col, a.data)


def read_matrix(path: str) -> CooMatrix:
    """按路径读取 .mtx 文件"""
    with open(path, 'rb') as f:
        return parse_matrix_market(f)


def write_matrix_market(m: CooMatrix, sink) -> None:
    """写出 general real coordinate 格式（17 位有效数字，往返一致）"""
    a = sp.coo_matrix((m.values, (m.rows, m.cols)), shape=(m.n_rows, m.n_cols))
    buf = io.BytesIO()
    sio.mmwrite(buf, a, field='real', symmetry='general', precision=17)
    blob = buf.getvalue()
    if isinstance(sink, (str, os.PathLike)):
        with open(sink, 'wb') as f:
            f.write(blob)
    elif isinstance(sink, io.TextIOBase):
        sink.write(blob.decode('utf-8'))
    else:
        sink.write(blob)


def coo_to_csr(m: CooMatrix) -> CsrMatrix:
    """COO → CSR（行内列号严格递增）"""
    order = np.lexsort((m.cols, m.rows))
    rows = m.rows[order]
    counts = np.bincount(rows, minlength=m.n_rows) if rows.size else np.zeros(m.n_rows, dtype=np.int64)
    row_ptr = np.zeros(m.n_rows + 1, dtype=np.int64)
    np.cumsum(counts, out=row_ptr[1:])
    return CsrMatrix(m.n_rows, m.n_cols, row_ptr,
                     m.cols[order].astype(np.int64), m.values[order].astype(np.float64))


def csr_to_coo(m: CsrMatrix) -> CooMatrix:
    rows = np.repeat(np.arange(m.n_rows, dtype=np.int64), m.row_lengths())
    return CooMatrix.from_triplets(m.n_rows, m.n_cols, rows, m.col_idx, m.values)
