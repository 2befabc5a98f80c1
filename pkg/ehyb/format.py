"""EHYB 格式：分区参数、行分类、重排计划、sliced-ELL + ER 组装"""
import logging
import zlib
from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np

from .errors import (
    ConfigError,
    DimensionMismatchError,
    InfeasibleParamsError,
    NotAssembledError,
    NotSquareError,
    VectorLengthError,
)
from .matrix_io import CooMatrix
from .partitioner import PartitionMap

log = logging.getLogger(__name__)

# 16 位本地列索引的上限
LOCAL_INDEX_LIMIT = 1 << 16


@dataclass(frozen=True)
class DeviceProfile:
    """模拟设备参数（默认对应 80 SM、warp 32、48 KiB 共享内存）"""
    num_processors: int = 80
    warp_size: int = 32
    shm_max: int = 49152

    def __post_init__(self):
        if self.num_processors < 1:
            raise ConfigError(f"num_processors must be >= 1, got {self.num_processors}")
        if self.warp_size < 1 or self.warp_size > LOCAL_INDEX_LIMIT:
            raise ConfigError(f"warp_size must be in [1, {LOCAL_INDEX_LIMIT}], got {self.warp_size}")
        if self.shm_max <= 0:
            raise ConfigError(f"shm_max must be > 0, got {self.shm_max}")


@dataclass(frozen=True)
class EhybParams:
    K: int
    n_parts: int
    vec_cache_size: int
    tau: int
    warp_size: int

    @property
    def slices_per_part(self) -> int:
        return self.vec_cache_size // self.warp_size

    @property
    def padded_dimension(self) -> int:
        return self.n_parts * self.vec_cache_size

    @property
    def value_dtype(self):
        return np.float32 if self.tau == 4 else np.float64


def _align(n: int, warp_size: int) -> int:
    return -(-n // warp_size) * warp_size


def cache_size_for(dimension: int, K: int, profile: DeviceProfile) -> int:
    """给定 K 时每个分区缓存的向量长度（向上取整并按 warp 对齐）"""
    return _align(-(-dimension // (K * profile.num_processors)), profile.warp_size)


def params_fit(dimension: int, tau: int, profile: DeviceProfile, K: int) -> bool:
    size = cache_size_for(dimension, K, profile)
    return size * tau <= profile.shm_max and size <= LOCAL_INDEX_LIMIT


def compute_params(dimension: int, tau: int, profile: DeviceProfile) -> EhybParams:
    """求满足共享内存容量的最小 K，n_parts = K×P"""
    if dimension < 1:
        raise InfeasibleParamsError(f"dimension must be >= 1, got {dimension}")
    if tau not in (4, 8):
        raise InfeasibleParamsError(f"tau must be 4 or 8, got {tau}")
    if profile.shm_max < profile.warp_size * tau:
        raise InfeasibleParamsError(
            f"shm_max {profile.shm_max} B cannot hold one warp of {tau}-byte values")
    # 缓存大小随 K 单调不增：先倍增找上界，再二分找最小 K
    hi = 1
    while not params_fit(dimension, tau, profile, hi):
        hi *= 2
    lo = hi // 2 + 1 if hi > 1 else 1
    while lo < hi:
        mid = (lo + hi) // 2
        if params_fit(dimension, tau, profile, mid):
            hi = mid
        else:
            lo = mid + 1
    K = hi
    size = cache_size_for(dimension, K, profile)
    log.debug("K=%d n_parts=%d vec_cache_size=%d", K, K * profile.num_processors, size)
    return EhybParams(K, K * profile.num_processors, size, tau, profile.warp_size)


@dataclass
class RowClassification:
    """每行的 inner/outer 计数及两个排序后的行序列"""
    inner_count: np.ndarray
    outer_count: np.ndarray
    part_of_row: np.ndarray
    s_array1: np.ndarray
    s_array2: np.ndarray

    @property
    def n_rows(self) -> int:
        return int(self.inner_count.size)


def _check_cover(m: CooMatrix, p: PartitionMap):
    if not m.is_square:
        raise NotSquareError(f"matrix must be square, got {m.n_rows}x{m.n_cols}")
    if p.n_vertices != m.n_rows:
        raise DimensionMismatchError(
            f"partition covers {p.n_vertices} vertices, matrix has {m.n_rows} rows")


def classify_rows(m: CooMatrix, p: PartitionMap) -> RowClassification:
    """统计每行同分区列（inner）和跨分区列（outer）的条目数"""
    _check_cover(m, p)
    n = m.n_rows
    inner_mask = p.assignment[m.rows] == p.assignment[m.cols]
    inner = np.bincount(m.rows[inner_mask], minlength=n).astype(np.int64)
    outer = np.bincount(m.rows[~inner_mask], minlength=n).astype(np.int64)
    rows = np.arange(n)
    # 分区内按 inner 降序，相等时保持原行号升序
    s_array1 = np.lexsort((rows, -inner, p.assignment))
    er_rows = np.flatnonzero(outer > 0)
    s_array2 = er_rows[np.lexsort((er_rows, -outer[er_rows]))]
    return RowClassification(inner, outer, p.assignment.copy(), s_array1, s_array2)


@dataclass
class ReorderPlan:
    dimension: int
    padded_dimension: int
    reorder_table: np.ndarray     # 旧行 → 新行（含填充行，长度 padded_dimension）
    inverse_table: np.ndarray     # 新行 → 旧行
    arrange_table: np.ndarray     # 旧行 → ER 槽位，非 ER 行为 -1
    y_idx_er: np.ndarray          # ER 槽位 → 新行
    part_boundary: np.ndarray

    @property
    def n_er_rows(self) -> int:
        return int(self.y_idx_er.size)


def build_reorder_plan(cls: RowClassification, params: EhybParams, p: PartitionMap) -> ReorderPlan:
    """分区按编号排列，分区内按 S_array1 顺序，不足部分以填充行补齐"""
    n = cls.n_rows
    if p.n_vertices != n:
        raise DimensionMismatchError(f"partition covers {p.n_vertices} vertices, expected {n}")
    if p.n_parts != params.n_parts:
        raise DimensionMismatchError(
            f"partition has {p.n_parts} parts, params expect {params.n_parts}")
    sizes = p.part_sizes
    if sizes.size and sizes.max() > params.vec_cache_size:
        raise DimensionMismatchError(
            f"partition of size {int(sizes.max())} exceeds vec_cache_size {params.vec_cache_size}")

    vec = params.vec_cache_size
    padded = params.padded_dimension
    part_boundary = np.arange(params.n_parts + 1, dtype=np.int64) * vec
    reorder = np.empty(padded, dtype=np.int64)

    # S_array1 已按分区连续分组
    offsets = np.concatenate(([0], np.cumsum(sizes)))
    slot_in_part = np.arange(n) - offsets[cls.part_of_row[cls.s_array1]]
    reorder[cls.s_array1] = part_boundary[cls.part_of_row[cls.s_array1]] + slot_in_part

    # 填充行占据每个分区末尾
    pad_new = np.concatenate([
        np.arange(part_boundary[q] + sizes[q], part_boundary[q + 1]) for q in range(params.n_parts)
    ]) if padded > n else np.empty(0, dtype=np.int64)
    reorder[n:] = pad_new

    inverse = np.empty(padded, dtype=np.int64)
    inverse[reorder] = np.arange(padded)

    arrange = np.full(n, -1, dtype=np.int64)
    arrange[cls.s_array2] = np.arange(cls.s_array2.size)
    y_idx_er = reorder[cls.s_array2].astype(np.int64)
    return ReorderPlan(n, padded, reorder, inverse, arrange, y_idx_er, part_boundary)


@dataclass
class EhybMatrix:
    params: EhybParams
    plan: ReorderPlan
    nnz: int
    val_ell: np.ndarray
    col_ell: np.ndarray           # uint16 分区内本地偏移
    position_ell: np.ndarray
    width_ell: np.ndarray
    row_width_ell: np.ndarray     # 每个新行的真实 inner 条目数
    val_er: np.ndarray
    col_er: np.ndarray            # uint32 全局新序列号
    position_er: np.ndarray
    width_er: np.ndarray
    row_width_er: np.ndarray      # 每个 ER 槽位的真实条目数
    source_digest: Optional[int] = None   # 源矩阵三元组的 CRC32，见 coo_digest

    @property
    def dimension(self) -> int:
        return self.plan.dimension

    @property
    def padded_dimension(self) -> int:
        return self.plan.padded_dimension

    @property
    def part_boundary(self) -> np.ndarray:
        return self.plan.part_boundary

    @property
    def y_idx_er(self) -> np.ndarray:
        return self.plan.y_idx_er

    @property
    def n_slices_ell(self) -> int:
        return int(self.width_ell.size)

    @property
    def n_slices_er(self) -> int:
        return int(self.width_er.size)

    @property
    def nnz_ell(self) -> int:
        return int(self.row_width_ell.sum())

    @property
    def nnz_er(self) -> int:
        return int(self.row_width_er.sum())

    def validate(self) -> None:
        """检查数组与参数、重排计划是否相互一致（未组装、被截断或被篡改时抛 NotAssembledError）"""
        p, plan = self.params, self.plan
        w, vec = p.warp_size, p.vec_cache_size
        padded = self.padded_dimension
        # 依次求值，前面的长度检查保证后面的下标访问不越界
        checks = [
            (lambda: p.padded_dimension == padded and vec % w == 0, "padded dimension"),
            (lambda: 0 <= plan.dimension <= padded, "dimension"),
            (lambda: plan.part_boundary.size == p.n_parts + 1
             and np.array_equal(plan.part_boundary, np.arange(p.n_parts + 1) * vec), "part_boundary"),
            (lambda: plan.reorder_table.size == padded and plan.inverse_table.size == padded, "reorder table length"),
            (lambda: padded == 0 or (plan.reorder_table.min() >= 0 and plan.reorder_table.max() < padded
                                     and np.array_equal(plan.inverse_table[plan.reorder_table],
                                                        np.arange(padded))), "reorder permutation"),
            (lambda: plan.arrange_table.size == plan.dimension, "arrange_table length"),
            (lambda: plan.dimension == 0 or (plan.arrange_table.min() >= -1
                                             and plan.arrange_table.max() < plan.n_er_rows), "arrange_table range"),
            (lambda: plan.y_idx_er.size == 0 or (plan.y_idx_er.min() >= 0 and plan.y_idx_er.max() < padded),
             "y_idx_er range"),
            (lambda: padded == self.n_slices_ell * w, "ELL slice count"),
            (lambda: self.position_ell.size == self.n_slices_ell + 1, "position_ell length"),
            (lambda: np.array_equal(np.diff(self.position_ell), self.width_ell * w)
             and self.position_ell[0] == 0, "ELL slice offsets"),
            (lambda: self.val_ell.size == self.col_ell.size == int(self.position_ell[-1]), "ELL slot arrays"),
            (lambda: self.row_width_ell.size == padded, "row_width_ell length"),
            (lambda: padded == 0 or np.all(self.row_width_ell.reshape(-1, w).max(axis=1) <= self.width_ell),
             "row_width_ell exceeds slice width"),
            (lambda: self.col_ell.size == 0 or int(self.col_ell.max()) < vec, "ELL local column range"),
            (lambda: self.position_er.size == self.n_slices_er + 1, "position_er length"),
            (lambda: np.array_equal(np.diff(self.position_er), self.width_er * w)
             and self.position_er[0] == 0, "ER slice offsets"),
            (lambda: self.val_er.size == self.col_er.size == int(self.position_er[-1]), "ER slot arrays"),
            (lambda: self.row_width_er.size == plan.n_er_rows == plan.y_idx_er.size, "row_width_er length"),
            (lambda: self.n_slices_er == -(-plan.n_er_rows // w), "ER slice count"),
            (lambda: self._er_widths_fit(), "row_width_er exceeds slice width"),
            (lambda: self.col_er.size == 0 or int(self.col_er.max()) < padded, "ER global column range"),
            (lambda: self.val_ell.dtype == p.value_dtype == self.val_er.dtype, "value precision"),
            (lambda: self.nnz == self.nnz_ell + self.nnz_er, "entry count"),
        ]
        for ok, what in checks:
            if not ok():
                raise NotAssembledError(f"inconsistent EHYB arrays: {what}")

    def _er_widths_fit(self) -> bool:
        w = self.params.warp_size
        padded_er = np.zeros(self.n_slices_er * w, dtype=np.int64)
        padded_er[:self.row_width_er.size] = self.row_width_er
        return bool(np.all(padded_er.reshape(-1, w).max(axis=1) <= self.width_er)) if padded_er.size else True


def _slice_layout(row_widths: np.ndarray, warp_size: int):
    """SELL-P 布局：每 warp_size 行一个 slice，宽度取 slice 内最大值"""
    n_slices = -(-row_widths.size // warp_size)
    padded = np.zeros(n_slices * warp_size, dtype=np.int64)
    padded[:row_widths.size] = row_widths
    width = padded.reshape(n_slices, warp_size).max(axis=1) if n_slices else np.zeros(0, dtype=np.int64)
    position = np.zeros(n_slices + 1, dtype=np.int64)
    np.cumsum(width * warp_size, out=position[1:])
    return width.astype(np.int64), position


def coo_digest(m: CooMatrix, dtype=np.float64) -> int:
    """按 (行, 列) 排序后的三元组 CRC32；数值先截到存储精度，与 ehyb_to_coo 的还原结果可比"""
    order = np.lexsort((m.cols, m.rows))
    crc = zlib.crc32(m.rows[order].astype('<i8').tobytes())
    crc = zlib.crc32(m.cols[order].astype('<i8').tobytes(), crc)
    return zlib.crc32(m.values[order].astype(dtype).astype('<f8').tobytes(), crc)


def _rank_within_row(rows: np.ndarray) -> np.ndarray:
    """rows 升序时，每个条目在本行中的序号 k"""
    if rows.size == 0:
        return rows
    return np.arange(rows.size) - np.searchsorted(rows, rows, side='left')


def assemble_ehyb(m: CooMatrix, plan: ReorderPlan, params: EhybParams, p: PartitionMap) -> EhybMatrix:
    """按重排计划把条目放入 sliced-ELL（inner）和 ER（outer）两部分"""
    _check_cover(m, p)
    if plan.dimension != m.n_rows:
        raise DimensionMismatchError(f"plan dimension {plan.dimension} vs matrix {m.n_rows}")
    w = params.warp_size
    vec = params.vec_cache_size
    dtype = params.value_dtype
    reorder = plan.reorder_table

    order = np.lexsort((m.cols, m.rows))
    rows, cols, vals = m.rows[order], m.cols[order], m.values[order]
    inner_mask = p.assignment[rows] == p.assignment[cols]

    # ELL 部分
    r_in, c_in, v_in = rows[inner_mask], cols[inner_mask], vals[inner_mask]
    row_width_ell = np.zeros(plan.padded_dimension, dtype=np.int64)
    np.add.at(row_width_ell, reorder[r_in], 1)
    width_ell, position_ell = _slice_layout(row_width_ell, w)
    new_r = reorder[r_in]
    k = _rank_within_row(r_in)
    slot = position_ell[new_r // w] + new_r % w + k * w
    local = reorder[c_in] - plan.part_boundary[p.assignment[r_in]]
    if local.size:
        assert local.min() >= 0 and local.max() < vec and vec <= LOCAL_INDEX_LIMIT, \
            "local column offset escapes the partition cache window"
    val_ell = np.zeros(int(position_ell[-1]), dtype=dtype)
    col_ell = np.zeros(int(position_ell[-1]), dtype=np.uint16)
    val_ell[slot] = v_in.astype(dtype)
    col_ell[slot] = local.astype(np.uint16)

    # ER 部分：槽位来自 arrange_table，列号为全局新序号
    outer = ~inner_mask
    r_out, c_out, v_out = rows[outer], cols[outer], vals[outer]
    row_width_er = np.zeros(plan.n_er_rows, dtype=np.int64)
    er_slot = plan.arrange_table[r_out]
    np.add.at(row_width_er, er_slot, 1)
    width_er, position_er = _slice_layout(row_width_er, w)
    k2 = _rank_within_row(r_out)
    slot2 = position_er[er_slot // w] + er_slot % w + k2 * w
    val_er = np.zeros(int(position_er[-1]), dtype=dtype)
    col_er = np.zeros(int(position_er[-1]), dtype=np.uint32)
    val_er[slot2] = v_out.astype(dtype)
    col_er[slot2] = reorder[c_out].astype(np.uint32)

    e = EhybMatrix(params, plan, m.nnz, val_ell, col_ell, position_ell, width_ell, row_width_ell,
                   val_er, col_er, position_er, width_er, row_width_er,
                   source_digest=coo_digest(m, dtype))
    log.debug("assembled: %d ELL slots, %d ER slots", val_ell.size, val_er.size)
    return e


def build_ehyb(m: CooMatrix, p: PartitionMap, params: EhybParams) -> EhybMatrix:
    cls = classify_rows(m, p)
    plan = build_reorder_plan(cls, params, p)
    return assemble_ehyb(m, plan, params, p)


def ehyb_to_coo(e: EhybMatrix) -> CooMatrix:
    """把非填充槽位映射回原始行列（守恒校验 / 仅有容器时的基准矩阵）"""
    e.validate()
    w = e.params.warp_size
    inv = e.plan.inverse_table
    rows: List[np.ndarray] = []
    cols: List[np.ndarray] = []
    vals: List[np.ndarray] = []

    new_rows = np.flatnonzero(e.row_width_ell)
    for k in range(int(e.row_width_ell.max()) if e.row_width_ell.size else 0):
        rr = new_rows[e.row_width_ell[new_rows] > k]
        slot = e.position_ell[rr // w] + rr % w + k * w
        rows.append(inv[rr])
        cols.append(inv[e.col_ell[slot].astype(np.int64) + e.part_boundary[rr // e.params.vec_cache_size]])
        vals.append(e.val_ell[slot].astype(np.float64))

    er_slots = np.arange(e.plan.n_er_rows)
    for k in range(int(e.row_width_er.max()) if e.row_width_er.size else 0):
        ss = er_slots[e.row_width_er > k]
        slot = e.position_er[ss // w] + ss % w + k * w
        rows.append(inv[e.y_idx_er[ss]])
        cols.append(inv[e.col_er[slot].astype(np.int64)])
        vals.append(e.val_er[slot].astype(np.float64))

    if rows:
        return CooMatrix.from_triplets(e.dimension, e.dimension, np.concatenate(rows),
                                       np.concatenate(cols), np.concatenate(vals))
    return CooMatrix.empty(e.dimension, e.dimension)


@dataclass
class FootprintStats:
    ell_slots: int
    er_slots: int
    ell_bytes: int
    er_bytes: int
    total_bytes: int
    savings_vs_32bit_cols: float
    ell_savings_with_metadata: float


def footprint_stats(e: EhybMatrix) -> FootprintStats:
    """内存占用：ELL 列号 2 字节，ER 列号 4 字节，元数据按 4 字节计"""
    tau = e.params.tau
    ell_slots = int(e.val_ell.size)
    er_slots = int(e.val_er.size)
    ell_meta = 4 * (e.position_ell.size + e.width_ell.size)
    er_meta = 4 * (e.position_er.size + e.width_er.size + e.y_idx_er.size)
    ell_bytes = ell_slots * (tau + 2) + ell_meta
    er_bytes = er_slots * (tau + 4) + er_meta
    wide_ell = ell_slots * (tau + 4) + ell_meta
    return FootprintStats(
        ell_slots=ell_slots,
        er_slots=er_slots,
        ell_bytes=ell_bytes,
        er_bytes=er_bytes,
        total_bytes=ell_bytes + er_bytes,
        savings_vs_32bit_cols=1.0 - (tau + 2) / (tau + 4),
        ell_savings_with_metadata=(1.0 - ell_bytes / wide_ell) if wide_ell else 0.0,
    )


def width_histogram(e: EhybMatrix) -> List[Dict[int, int]]:
    """每个分区：inner 宽度 → 行数（不含填充行）"""
    vec = e.params.vec_cache_size
    real = np.zeros(e.padded_dimension, dtype=bool)
    real[e.plan.reorder_table[:e.dimension]] = True
    result = []
    for q in range(e.params.n_parts):
        lo, hi = q * vec, (q + 1) * vec
        widths, counts = np.unique(e.row_width_ell[lo:hi][real[lo:hi]], return_counts=True)
        result.append({int(wd): int(c) for wd, c in zip(widths, counts)})
    return result


def padding_overhead(e: EhybMatrix) -> float:
    return (e.padded_dimension - e.dimension) / e.dimension if e.dimension else 0.0


def permute_vector(x, plan: ReorderPlan) -> np.ndarray:
    """原始顺序 → 重排顺序（长度 padded_dimension，填充位为 0）"""
    x = np.asarray(x)
    if x.ndim != 1 or x.size != plan.dimension:
        raise VectorLengthError(f"vector length {x.size} != dimension {plan.dimension}")
    out = np.zeros(plan.padded_dimension, dtype=x.dtype if x.dtype.kind == 'f' else np.float64)
    out[plan.reorder_table[:plan.dimension]] = x
    return out


def unpermute_vector(y, plan: ReorderPlan) -> np.ndarray:
    y = np.asarray(y)
    if y.ndim != 1 or y.size != plan.padded_dimension:
        raise VectorLengthError(f"vector length {y.size} != padded dimension {plan.padded_dimension}")
    return y[plan.reorder_table[:plan.dimension]].copy()
