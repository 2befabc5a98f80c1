"""模拟设备上的 EHYB SpMV（分区向量显式缓存 + slice 窃取）及 CSR 基准"""
import heapq
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .errors import ConfigError, NotAssembledError, VectorLengthError
from .format import EhybMatrix, permute_vector, unpermute_vector
from .matrix_io import CsrMatrix

log = logging.getLogger(__name__)

SCHEDULING_MODES = ('static', 'stealing')


@dataclass
class ExecutionConfig:
    worker_count: int = 1
    scheduling: str = 'static'
    record_stats: bool = True
    warps_per_block: int = 4
    record_trace: bool = False

    def __post_init__(self):
        if self.worker_count < 1:
            raise ConfigError(f"worker_count must be >= 1, got {self.worker_count}")
        if self.warps_per_block < 1:
            raise ConfigError(f"warps_per_block must be >= 1, got {self.warps_per_block}")
        if self.scheduling not in SCHEDULING_MODES:
            raise ConfigError(f"scheduling must be one of {SCHEDULING_MODES}, got {self.scheduling!r}")


@dataclass
class ExecStats:
    cached_loads: int = 0
    uncached_loads: int = 0
    flops: int = 0
    bytes_touched_model: int = 0
    per_block_slices: List[int] = field(default_factory=list)
    per_warp_slices: List[List[int]] = field(default_factory=list)
    er_slices_per_worker: List[int] = field(default_factory=list)
    trace: List[Tuple[str, int]] = field(default_factory=list)


class SliceCounter:
    """atomicAdd 的模拟：加锁的自增计数器"""

    def __init__(self, start: int, end: int):
        self._next = start
        self._end = end
        self._lock = threading.Lock()

    def claim(self) -> Optional[int]:
        with self._lock:
            if self._next >= self._end:
                return None
            sid = self._next
            self._next += 1
            return sid


def spmv_csr(m: CsrMatrix, x) -> np.ndarray:
    """CSR 基准：每行按列号升序累加"""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size != m.n_cols:
        raise VectorLengthError(f"vector length {x.size} != n_cols {m.n_cols}")
    y = np.zeros(m.n_rows, dtype=np.float64)
    lengths = m.row_lengths()
    for k in range(int(lengths.max()) if lengths.size else 0):
        rows = np.flatnonzero(lengths > k)
        idx = m.row_ptr[rows] + k
        y[rows] += m.values[idx] * x[m.col_idx[idx]]
    return y


def _slice_sums(vals: np.ndarray, cols: np.ndarray, position: int, width: int,
                warp: int, source: np.ndarray) -> np.ndarray:
    """一个 warp 处理一个 slice：lane 并行，k 升序累加"""
    acc = np.zeros(warp, dtype=vals.dtype)
    for k in range(width):
        lo = position + k * warp
        acc += vals[lo:lo + warp] * source[cols[lo:lo + warp]]
    return acc


class _Run:
    """一次 spmv_ehyb 调用的共享状态"""

    def __init__(self, e: EhybMatrix, x: np.ndarray, cfg: ExecutionConfig):
        self.e = e
        self.x = x
        self.cfg = cfg
        self.w = e.params.warp_size
        self.y = np.zeros(e.padded_dimension, dtype=e.val_ell.dtype)
        self.trace: List[Tuple[str, int]] = []
        self.trace_lock = threading.Lock()
        self.slice_loads_ell = e.row_width_ell.reshape(-1, self.w).sum(axis=1)
        padded_er = np.zeros(e.n_slices_er * self.w, dtype=np.int64)
        padded_er[:e.row_width_er.size] = e.row_width_er
        self.slice_loads_er = padded_er.reshape(-1, self.w).sum(axis=1)

    def _record(self, phase: str, idx: int):
        if self.cfg.record_trace:
            with self.trace_lock:
                self.trace.append((phase, idx))

    def _warp_order(self, start: int, end: int) -> List[Tuple[int, int]]:
        """返回 (warp, slice) 处理序列

        static: warp i 固定处理 start+i, start+i+warps, ...
        stealing: 每个 warp 先取 start+warpIdx，之后空闲最早的 warp 从块内计数器领下一个 slice
        """
        warps = self.cfg.warps_per_block
        if self.cfg.scheduling == 'static':
            return [((s - start) % warps, s) for s in range(start, end)]
        counter = SliceCounter(start + warps, end)
        order = []
        clock = []
        for wi in range(min(warps, end - start)):
            order.append((wi, start + wi))
            heapq.heappush(clock, (int(self.e.width_ell[start + wi]) + 1, wi))
        while clock:
            t, wi = heapq.heappop(clock)
            sid = counter.claim()
            if sid is None:
                continue
            order.append((wi, sid))
            heapq.heappush(clock, (t + int(self.e.width_ell[sid]) + 1, wi))
        return order

    def run_block(self, b: int) -> Dict:
        e, w = self.e, self.w
        lo, hi = int(e.part_boundary[b]), int(e.part_boundary[b + 1])
        cached = self.x[lo:hi].copy()
        spp = e.params.slices_per_part
        start, end = b * spp, (b + 1) * spp
        warp_counts = [0] * self.cfg.warps_per_block
        loads = 0
        for wi, sid in self._warp_order(start, end):
            acc = _slice_sums(e.val_ell, e.col_ell, int(e.position_ell[sid]), int(e.width_ell[sid]), w, cached)
            self.y[sid * w:(sid + 1) * w] = acc
            loads += int(self.slice_loads_ell[sid])
            warp_counts[wi] += 1
        self._record('ell', b)
        return {'block': b, 'cached': loads, 'slices': end - start, 'warps': warp_counts}

    def run_er_slice(self, s: int) -> int:
        e, w = self.e, self.w
        acc = _slice_sums(e.val_er, e.col_er, int(e.position_er[s]), int(e.width_er[s]), w, self.x)
        first = s * w
        n_real = min(w, e.plan.n_er_rows - first)
        # 每个 ER 行只出现一次，屏障之后的 += 无竞争
        self.y[e.y_idx_er[first:first + n_real]] += acc[:n_real]
        self._record('er', s)
        return int(self.slice_loads_er[s])


def _validate_input(e: EhybMatrix, x_reordered) -> np.ndarray:
    if not isinstance(e, EhybMatrix):
        raise NotAssembledError(f"expected an assembled EhybMatrix, got {type(e).__name__}")
    e.validate()
    x = np.asarray(x_reordered)
    if x.ndim != 1 or x.size != e.padded_dimension:
        raise VectorLengthError(f"vector length {x.size} != padded dimension {e.padded_dimension}")
    return x.astype(e.val_ell.dtype, copy=False)


def spmv_ehyb(e: EhybMatrix, x_reordered, cfg: Optional[ExecutionConfig] = None):
    """两阶段执行：ELL（分区缓存）全部写完后才开始 ER 累加

    结果与 worker_count、调度方式无关（逐位一致）。
    返回 (y_reordered, ExecStats)。
    """
    cfg = cfg or ExecutionConfig()
    x = _validate_input(e, x_reordered)
    run = _Run(e, x, cfg)
    n_blocks = e.params.n_parts
    n_workers = cfg.worker_count

    def ell_worker(wid: int, counter: Optional[SliceCounter]) -> List[Dict]:
        done = []
        if counter is None:
            for b in range(wid, n_blocks, n_workers):
                done.append(run.run_block(b))
        else:
            while (b := counter.claim()) is not None:
                done.append(run.run_block(b))
        return done

    def er_worker(wid: int, counter: Optional[SliceCounter]) -> Tuple[int, int]:
        loads = count = 0
        if counter is None:
            for s in range(wid, e.n_slices_er, n_workers):
                loads += run.run_er_slice(s)
                count += 1
        else:
            while (s := counter.claim()) is not None:
                loads += run.run_er_slice(s)
                count += 1
        return loads, count

    stealing = cfg.scheduling == 'stealing'
    with ThreadPoolExecutor(max_workers=n_workers) as pool:
        block_counter = SliceCounter(0, n_blocks) if stealing else None
        ell_results = list(pool.map(lambda wid: ell_worker(wid, block_counter), range(n_workers)))
        # 屏障：上面的 list() 等待全部 ELL 写入完成
        er_counter = SliceCounter(0, e.n_slices_er) if stealing else None
        er_results = list(pool.map(lambda wid: er_worker(wid, er_counter), range(n_workers)))

    log.debug("spmv_ehyb: %d blocks, %d ER slices, %d workers (%s)",
              n_blocks, e.n_slices_er, n_workers, cfg.scheduling)
    stats = ExecStats()
    if cfg.record_stats:
        blocks = sorted((r for chunk in ell_results for r in chunk), key=lambda r: r['block'])
        stats.cached_loads = sum(r['cached'] for r in blocks)
        stats.per_block_slices = [r['slices'] for r in blocks]
        stats.per_warp_slices = [r['warps'] for r in blocks]
        stats.uncached_loads = sum(loads for loads, _ in er_results)
        stats.er_slices_per_worker = [count for _, count in er_results]
        stats.flops = 2 * e.nnz
        stats.bytes_touched_model = traffic_model(e, e.params.tau)
    stats.trace = run.trace
    return run.y, stats


def spmv_ehyb_user(e: EhybMatrix, x, cfg: Optional[ExecutionConfig] = None) -> np.ndarray:
    """原始行序接口：permute → spmv_ehyb → unpermute"""
    x = np.asarray(x)
    if x.ndim != 1 or x.size != e.dimension:
        raise VectorLengthError(f"vector length {x.size} != dimension {e.dimension}")
    y, _ = spmv_ehyb(e, permute_vector(x.astype(e.val_ell.dtype), e.plan), cfg)
    return unpermute_vector(y, e.plan)


def traffic_breakdown(e: EhybMatrix, tau: Optional[int] = None) -> Dict[str, int]:
    """访存量模型（仅用于报告）

    ELL 槽位 (τ+2) + ER 槽位 (τ+4) + 元数据 4B/项 + 分区窗口读 x 一次 (n·τ)
    + ER 非缓存读 (uncached·τ) + 写 y (n·τ)
    """
    tau = tau or e.params.tau
    meta_items = (e.position_ell.size + e.width_ell.size + e.part_boundary.size
                  + e.position_er.size + e.width_er.size + e.y_idx_er.size)
    parts = {
        'ell_slot_bytes': int(e.val_ell.size) * (tau + 2),
        'er_slot_bytes': int(e.val_er.size) * (tau + 4),
        'metadata_bytes': 4 * int(meta_items),
        'cached_x_bytes': e.dimension * tau,
        'uncached_x_bytes': e.nnz_er * tau,
        'y_write_bytes': e.dimension * tau,
    }
    parts['total_bytes'] = sum(parts.values())
    return parts


def traffic_model(e: EhybMatrix, tau: Optional[int] = None) -> int:
    return traffic_breakdown(e, tau)['total_bytes']
