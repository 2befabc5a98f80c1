"""预处理流水线：参数 → 划分 → 分类/重排/组装，并记录各阶段耗时"""
import time
from dataclasses import dataclass
from functools import wraps
from typing import Dict, Optional

from .errors import NotSquareError
from .format import (
    DeviceProfile,
    EhybMatrix,
    EhybParams,
    build_ehyb,
    compute_params,
    footprint_stats,
)
from .matrix_io import CooMatrix
from .partitioner import (
    PartitionMap,
    build_graph,
    cut_metrics,
    load_partition_file,
    partition_graph,
    rebalance_partition,
)


def timed(func):
    """计时装饰器：返回 (结果, 耗时秒)"""
    @wraps(func)
    def wrapper(*args, **kwargs):
        start = time.perf_counter()
        result = func(*args, **kwargs)
        return result, time.perf_counter() - start
    return wrapper


@dataclass
class ConversionResult:
    matrix: CooMatrix
    ehyb: EhybMatrix
    partition: PartitionMap
    params: EhybParams
    partition_time: float
    reorder_time: float
    inner_entries: int
    extra_entries: int
    inner_fraction: float

    @property
    def preprocessing_time(self) -> float:
        return self.partition_time + self.reorder_time


@timed
def _partition_stage(m: CooMatrix, params: EhybParams, parts_file: Optional[str], seed: int) -> PartitionMap:
    g = build_graph(m)
    if parts_file:
        # 外部划分（如 METIS 输出）同样要满足缓存容量
        p = load_partition_file(parts_file, m.n_rows, params.n_parts)
        return rebalance_partition(g, p, params.vec_cache_size)
    return partition_graph(g, params.n_parts, params.vec_cache_size, seed=seed)


@timed
def _assemble_stage(m: CooMatrix, p: PartitionMap, params: EhybParams) -> EhybMatrix:
    return build_ehyb(m, p, params)


def convert_matrix(m: CooMatrix, profile: DeviceProfile, tau: int,
                   parts_file: Optional[str] = None, seed: int = 0) -> ConversionResult:
    """COO → EHYB 全流程"""
    if not m.is_square:
        raise NotSquareError(f"matrix must be square, got {m.n_rows}x{m.n_cols}")
    params = compute_params(m.n_rows, tau, profile)
    p, t_part = _partition_stage(m, params, parts_file, seed)
    e, t_reorder = _assemble_stage(m, p, params)
    inner, extra, fraction = cut_metrics(m, p)
    return ConversionResult(m, e, p, params, t_part, t_reorder, inner, extra, fraction)


def conversion_summary(result: ConversionResult, name: str = '') -> Dict:
    """用于打印/入库的结构化摘要"""
    e = result.ehyb
    fp = footprint_stats(e)
    return {
        'matrix': name,
        'dimension': e.dimension,
        'nnz': e.nnz,
        'K': result.params.K,
        'n_parts': result.params.n_parts,
        'vec_cache_size': result.params.vec_cache_size,
        'tau': result.params.tau,
        'inner_entries': result.inner_entries,
        'extra_entries': result.extra_entries,
        'inner_fraction': result.inner_fraction,
        'ell_nnz': e.nnz_ell,
        'er_nnz': e.nnz_er,
        'er_rows': e.plan.n_er_rows,
        'footprint_bytes': fp.total_bytes,
        'partition_time_s': result.partition_time,
        'reorder_time_s': result.reorder_time,
    }
