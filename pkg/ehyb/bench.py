"""基准测试与正确性校验：确定性向量、中位数计时、报告读写"""
import hashlib
import io
import json
import time
from dataclasses import asdict, dataclass, fields
from typing import Callable, Dict, List, Optional, Union

import numpy as np
import pandas as pd

from .engine import ExecutionConfig, spmv_csr, spmv_ehyb, spmv_ehyb_user
from .errors import EhybError
from .format import EhybMatrix, footprint_stats, permute_vector
from .matrix_io import CsrMatrix, coo_to_csr
from .pipeline import ConversionResult

REPORT_SCHEMA_VERSION = 1

# Numerical Recipes 的 32 位线性同余参数
LCG_A = 1664525
LCG_C = 1013904223
LCG_M = 1 << 32


def lcg_vector(n: int, seed: int) -> np.ndarray:
    """确定性伪随机向量，取值 [-1, 1)

    state_{i+1} = (a·state_i + c) mod 2^32，state_0 = seed mod 2^32，
    x_i = 2·state_{i+1}/2^32 − 1。跨平台可复现。
    """
    out = np.empty(n, dtype=np.float64)
    state = seed % LCG_M
    for i in range(n):
        state = (LCG_A * state + LCG_C) % LCG_M
        out[i] = state
    return out * (2.0 / LCG_M) - 1.0


def median_time(fn: Callable[[], object], reps: int, warmup: int) -> float:
    """warmup 次预热后取 reps 次的中位数（秒）"""
    for _ in range(warmup):
        fn()
    samples = []
    for _ in range(max(reps, 1)):
        start = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - start)
    return float(np.median(samples))


def relative_error(y: np.ndarray, reference: np.ndarray) -> float:
    diff = float(np.max(np.abs(y - reference))) if y.size else 0.0
    scale = float(np.max(np.abs(reference))) if reference.size else 0.0
    return diff / scale if scale > 0 else diff


def verify(e: EhybMatrix, oracle: CsrMatrix, n_vectors: int, seed: int, tolerance: float,
           cfg: Optional[ExecutionConfig] = None) -> Dict:
    """在 n_vectors 个种子向量上对比 EHYB 与 CSR 基准"""
    if oracle.n_rows != e.dimension:
        raise EhybError(f"oracle has {oracle.n_rows} rows, EHYB matrix {e.dimension}")
    worst = 0.0
    errors = []
    for i in range(n_vectors):
        vec_seed = seed + i
        x = lcg_vector(e.dimension, vec_seed)
        if e.params.tau == 4:
            x = x.astype(np.float32).astype(np.float64)
        err = relative_error(spmv_ehyb_user(e, x, cfg).astype(np.float64), spmv_csr(oracle, x))
        errors.append(err)
        worst = max(worst, err)
        if not err <= tolerance:
            return {'success': False, 'max_rel_error': err, 'failed_seed': vec_seed,
                    'tolerance': tolerance, 'errors': errors}
    return {'success': True, 'max_rel_error': worst, 'failed_seed': None,
            'tolerance': tolerance, 'errors': errors}


@dataclass
class BenchReport:
    schema_version: int
    matrix: str
    kernel: str
    precision: str
    dimension: int
    nnz: int
    n_parts: int
    vec_cache_size: int
    inner_fraction: float
    ell_nnz: int
    er_nnz: int
    footprint_bytes: int
    per_slot_savings: float
    ell_savings_with_metadata: float
    workers: int
    scheduling: str
    reps: int
    warmup: int
    median_time_s: float
    gflops: float
    flops: int
    partition_time_s: float
    reorder_time_s: float
    preprocessing_time_s: float
    preprocessing_ratio: float
    result_digest: str


def _digest(y: np.ndarray) -> str:
    return hashlib.sha1(np.ascontiguousarray(y).tobytes()).hexdigest()[:16]


def run_bench(result: ConversionResult, name: str, reps: int, warmup: int,
              cfg: ExecutionConfig, seed: int = 0) -> List[BenchReport]:
    """对 ehyb 与 csr-oracle 两个内核各计时一次，返回两行报告"""
    e = result.ehyb
    csr = coo_to_csr(result.matrix)
    x = lcg_vector(e.dimension, seed)
    x_reordered = permute_vector(x.astype(e.val_ell.dtype), e.plan)
    fp = footprint_stats(e)
    precision = 'f32' if e.params.tau == 4 else 'f64'
    flops = 2 * e.nnz

    y_ehyb, _ = spmv_ehyb(e, x_reordered, cfg)
    y_csr = spmv_csr(csr, x)
    timings = {
        'ehyb': (median_time(lambda: spmv_ehyb(e, x_reordered, cfg), reps, warmup), fp.total_bytes, y_ehyb),
        'csr-oracle': (median_time(lambda: spmv_csr(csr, x), reps, warmup),
                       (e.params.tau + 4) * e.nnz + 4 * (e.dimension + 1), y_csr),
    }
    reports = []
    for kernel, (median, footprint, y) in timings.items():
        reports.append(BenchReport(
            schema_version=REPORT_SCHEMA_VERSION,
            matrix=name,
            kernel=kernel,
            precision=precision,
            dimension=e.dimension,
            nnz=e.nnz,
            n_parts=result.params.n_parts,
            vec_cache_size=result.params.vec_cache_size,
            inner_fraction=result.inner_fraction,
            ell_nnz=e.nnz_ell,
            er_nnz=e.nnz_er,
            footprint_bytes=int(footprint),
            per_slot_savings=fp.savings_vs_32bit_cols if kernel == 'ehyb' else 0.0,
            ell_savings_with_metadata=fp.ell_savings_with_metadata if kernel == 'ehyb' else 0.0,
            workers=cfg.worker_count,
            scheduling=cfg.scheduling,
            reps=reps,
            warmup=warmup,
            median_time_s=median,
            gflops=flops / median / 1e9 if median > 0 else 0.0,
            flops=flops,
            partition_time_s=result.partition_time,
            reorder_time_s=result.reorder_time,
            preprocessing_time_s=result.preprocessing_time,
            preprocessing_ratio=result.preprocessing_time / median if median > 0 else 0.0,
            result_digest=_digest(y),
        ))
    return reports


def write_reports(reports: List[BenchReport], sink, fmt: str = 'csv') -> None:
    """CSV 或 JSON（records）输出；sink 为路径或文本流"""
    df = pd.DataFrame([asdict(r) for r in reports], columns=[f.name for f in fields(BenchReport)])
    if fmt == 'csv':
        df.to_csv(sink, index=False)
    elif fmt == 'json':
        text = json.dumps([asdict(r) for r in reports], ensure_ascii=False, indent=2, default=json_default)
        if hasattr(sink, 'write'):
            sink.write(text + '\n')
        else:
            with open(sink, 'w', encoding='utf-8') as f:
                f.write(text + '\n')
    else:
        raise ValueError(f"unknown report format {fmt!r}")


def read_reports(source: Union[str, io.TextIOBase], fmt: str = 'csv') -> List[BenchReport]:
    """读取 write_reports 的输出，并检查 schema 版本"""
    if fmt == 'csv':
        df = pd.read_csv(source, dtype={'result_digest': str, 'matrix': str})
    elif fmt == 'json':
        if hasattr(source, 'read'):
            text = source.read()
        else:
            with open(source, encoding='utf-8') as f:
                text = f.read()
        df = pd.DataFrame(json.loads(text))
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    names = [f.name for f in fields(BenchReport)]
    missing = [n for n in names if n not in df.columns]
    if missing:
        raise EhybError(f"report is missing columns: {', '.join(missing)}")
    versions = set(int(v) for v in df['schema_version'])
    if versions - {REPORT_SCHEMA_VERSION}:
        raise EhybError(f"unsupported report schema version(s): {sorted(versions)}")
    types = {f.name: f.type for f in fields(BenchReport)}
    reports = []
    for row in df[names].to_dict(orient='records'):
        reports.append(BenchReport(**{k: _coerce(types[k], v) for k, v in row.items()}))
    return reports


def _coerce(tp, value):
    if tp in (int, 'int'):
        return int(value)
    if tp in (float, 'float'):
        return float(value)
    return '' if value is None or (isinstance(value, float) and np.isnan(value)) else str(value)


def json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"{type(obj).__name__} is not JSON serializable")
