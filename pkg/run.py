"""EHYB 命令行入口

python run.py convert|verify|bench|stats|gen ...

stdout 只输出结构化结果（JSON / CSV），提示信息走日志（stderr + 文件）。
退出码：0 成功，1 校验失败，2 参数/输入错误。
"""
import argparse
import dataclasses
import json
import os
import sys
from typing import List, Optional

import numpy as np

from config import Config
from ehyb import (
    Database,
    DeviceProfile,
    EhybError,
    ExecutionConfig,
    build_graph,
    coo_digest,
    coo_to_csr,
    convert_matrix,
    conversion_summary,
    cut_metrics,
    edge_cut,
    ehyb_to_coo,
    footprint_stats,
    padding_overhead,
    permute_vector,
    random_partition,
    read_ehyb_container,
    read_matrix,
    run_bench,
    spmv_ehyb,
    traffic_breakdown,
    verify,
    width_histogram,
    write_ehyb_container,
    write_matrix_market,
    write_reports,
)
from ehyb.bench import json_default, lcg_vector
from ehyb.generators import KINDS, generate
from ehyb.logger import get_logger

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_USAGE = 2


def _matrix_name(path: str) -> str:
    return os.path.splitext(os.path.basename(path))[0]


def _emit(record) -> None:
    """结构化记录写到 stdout"""
    print(json.dumps(record, ensure_ascii=False, default=json_default))


class EhybCli:
    """命令实现；每个命令返回退出码"""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.logger = get_logger()
        self.record_history = Config.RECORD_HISTORY and not getattr(args, 'no_history', False)
        self._db = None

    @property
    def db(self) -> Database:
        if self._db is None:
            self._db = Database(Config.DATABASE_PATH)
        return self._db

    # ---------- 参数解析 ----------

    def profile(self) -> DeviceProfile:
        a = self.args
        overrides = {name: value for name, value in (
            ('num_processors', a.P), ('warp_size', a.warp), ('shm_max', a.shm_bytes)) if value is not None}
        return dataclasses.replace(Config.device_profile(), **overrides)

    def tau(self) -> int:
        a = self.args
        if a.tau is not None:
            return a.tau
        if a.precision is not None:
            return 4 if a.precision == 'f32' else 8
        return Config.VALUE_BYTES

    def exec_config(self) -> ExecutionConfig:
        a = self.args
        return ExecutionConfig(
            worker_count=a.workers if a.workers is not None else Config.WORKERS,
            scheduling=a.scheduling or Config.SCHEDULING,
            warps_per_block=Config.WARPS_PER_BLOCK,
        )

    def seed(self) -> int:
        return self.args.seed if self.args.seed is not None else Config.PARTITION_SEED

    def convert(self, path: str):
        m = read_matrix(path)
        self.logger.log_info(f"读取矩阵 {path}: {m.n_rows}x{m.n_cols}, nnz={m.nnz}")
        return convert_matrix(m, self.profile(), self.tau(),
                              parts_file=self.args.parts_file, seed=self.seed())

    # ---------- 命令 ----------

    def cmd_convert(self) -> int:
        """.mtx → .ehyb 容器，并输出转换摘要"""
        a = self.args
        result = self.convert(a.input)
        out = a.output or os.path.splitext(a.input)[0] + '.ehyb'
        write_ehyb_container(result.ehyb, out)

        summary = conversion_summary(result, _matrix_name(a.input))
        summary['output'] = out
        self.logger.log_conversion(summary)
        if self.record_history:
            self.db.add_conversion(summary)
        _emit(summary)
        return EXIT_OK

    def cmd_verify(self) -> int:
        """EHYB 与 CSR 基准对比；超出容差或源矩阵摘要不符返回 1"""
        a = self.args
        digest_ok = None
        if a.input.endswith('.ehyb'):
            e = read_ehyb_container(a.input)
            if a.matrix:
                oracle = read_matrix(a.matrix)
            else:
                # 只有容器时用其自身还原的 COO 作基准，再用转换时记下的摘要核对还原结果
                oracle = ehyb_to_coo(e)
                if e.source_digest is None:
                    self.logger.log_warning("⚠️ 容器没有源矩阵摘要，只能检查 kernel 本身")
                else:
                    digest_ok = coo_digest(oracle, e.val_ell.dtype) == e.source_digest
                    if not digest_ok:
                        self.logger.log_error("❌ 容器还原出的矩阵与转换时的源矩阵摘要不一致")
        else:
            result = self.convert(a.input)
            e, oracle = result.ehyb, result.matrix

        tau = e.params.tau
        tolerance = a.tolerance if a.tolerance is not None else Config.tolerance_for(tau)
        n_vectors = a.vectors if a.vectors is not None else Config.VERIFY_VECTORS
        outcome = verify(e, coo_to_csr(oracle), n_vectors, Config.VERIFY_SEED, tolerance, self.exec_config())
        self.logger.log_verification(outcome)
        success = outcome['success'] and digest_ok is not False

        _emit({
            'matrix': _matrix_name(a.input),
            'success': success,
            'max_rel_error': outcome['max_rel_error'],
            'failed_seed': outcome['failed_seed'],
            'tolerance': tolerance,
            'vectors': len(outcome['errors']),
            'source_digest_match': digest_ok,
        })
        return EXIT_OK if success else EXIT_VERIFY_FAILED

    def cmd_bench(self) -> int:
        """SpMV 计时（ehyb 与 csr-oracle 各一行）"""
        a = self.args
        result = self.convert(a.input)
        reps = a.reps if a.reps is not None else Config.BENCH_REPS
        warmup = a.warmup if a.warmup is not None else Config.BENCH_WARMUP
        reports = run_bench(result, _matrix_name(a.input), reps, warmup, self.exec_config(), seed=self.seed())

        for report in reports:
            self.logger.log_bench_report(report)
            if self.record_history:
                self.db.add_bench_report(report)

        fmt = a.out or Config.REPORT_FORMAT
        write_reports(reports, a.output or sys.stdout, fmt)
        if a.output:
            self.logger.log_info(f"✓ 报告已写入 {a.output}")
        return EXIT_OK

    def cmd_stats(self) -> int:
        """格式统计：inner 比例、ER 行数、宽度直方图、填充率、访存模型"""
        a = self.args
        result = self.convert(a.input)
        e, params = result.ehyb, result.params

        fp = footprint_stats(e)
        x = permute_vector(lcg_vector(e.dimension, self.seed()).astype(e.val_ell.dtype), e.plan)
        _, stats = spmv_ehyb(e, x, self.exec_config())

        # 随机均衡划分作为对照
        g = build_graph(result.matrix)
        baseline = [
            cut_metrics(result.matrix,
                        random_partition(e.dimension, params.n_parts, params.vec_cache_size, seed=t))[2]
            for t in range(Config.BASELINE_TRIALS)
        ]

        record = {
            'matrix': _matrix_name(a.input),
            'dimension': e.dimension,
            'nnz': e.nnz,
            'K': params.K,
            'n_parts': params.n_parts,
            'vec_cache_size': params.vec_cache_size,
            'tau': params.tau,
            'inner_entries': result.inner_entries,
            'extra_entries': result.extra_entries,
            'inner_fraction': result.inner_fraction,
            'random_baseline_inner_fraction': float(np.mean(baseline)) if baseline else 0.0,
            'edge_cut': edge_cut(g, result.partition),
            'er_rows': e.plan.n_er_rows,
            'ell_nnz': e.nnz_ell,
            'er_nnz': e.nnz_er,
            'padding_overhead': padding_overhead(e),
            'footprint_bytes': fp.total_bytes,
            'per_slot_savings': fp.savings_vs_32bit_cols,
            'ell_savings_with_metadata': fp.ell_savings_with_metadata,
            'width_histogram': [{str(w): c for w, c in part.items()} for part in width_histogram(e)],
            'cached_loads': stats.cached_loads,
            'uncached_loads': stats.uncached_loads,
            'traffic': traffic_breakdown(e),
        }
        self.logger.log_info(
            f"inner={record['inner_fraction']:.4f} (随机基线 {record['random_baseline_inner_fraction']:.4f}) "
            f"ER行={record['er_rows']} 填充率={record['padding_overhead']:.4f}")
        _emit(record)
        return EXIT_OK

    def cmd_gen(self) -> int:
        """生成测试矩阵并写成 .mtx"""
        a = self.args
        m = generate(a.kind, a.n, density=a.density, seed=self.seed())
        write_matrix_market(m, a.output)
        self.logger.log_info(f"✓ 生成 {a.kind} {m.n_rows}x{m.n_cols} nnz={m.nnz} → {a.output}")
        _emit({'kind': a.kind, 'dimension': m.n_rows, 'nnz': m.nnz, 'output': a.output})
        return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    device = argparse.ArgumentParser(add_help=False)
    device.add_argument('--P', type=int, default=None, help='处理器（SM）数量')
    device.add_argument('--warp', type=int, default=None, help='warp 大小')
    device.add_argument('--shm-bytes', '--shm', dest='shm_bytes', type=int, default=None,
                        help='每个 block 的共享内存字节数')
    device.add_argument('--tau', type=int, choices=(4, 8), default=None, help='数值字节数')
    device.add_argument('--precision', choices=('f32', 'f64'), default=None)
    device.add_argument('--parts-file', default=None, help='外部划分文件（每行一个分区号）')
    device.add_argument('--seed', type=int, default=None)
    device.add_argument('--workers', type=int, default=None)
    device.add_argument('--scheduling', choices=('static', 'stealing'), default=None)
    device.add_argument('--no-history', action='store_true', help='不写入历史数据库')

    parser = argparse.ArgumentParser(prog='run.py', description='EHYB sparse format toolkit')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('convert', parents=[device], help='convert .mtx to .ehyb')
    p.add_argument('input')
    p.add_argument('-o', '--output', default=None)

    p = sub.add_parser('verify', parents=[device], help='check EHYB SpMV against CSR')
    p.add_argument('input', help='.mtx or .ehyb')
    p.add_argument('--matrix', default=None, help='reference .mtx for an .ehyb input')
    p.add_argument('--tolerance', type=float, default=None)
    p.add_argument('--vectors', type=int, default=None)

    p = sub.add_parser('bench', parents=[device], help='time SpMV kernels')
    p.add_argument('input')
    p.add_argument('--reps', type=int, default=None)
    p.add_argument('--warmup', type=int, default=None)
    p.add_argument('--out', choices=('csv', 'json'), default=None)
    p.add_argument('-o', '--output', default=None)

    p = sub.add_parser('stats', parents=[device], help='format statistics')
    p.add_argument('input')

    p = sub.add_parser('gen', parents=[device], help='write a generated matrix')
    p.add_argument('kind', choices=KINDS)
    p.add_argument('n', type=int)
    p.add_argument('--density', type=float, default=0.01)
    p.add_argument('-o', '--output', required=True)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """主函数"""
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE

    logger = get_logger()
    errors = Config.validate_config()
    if errors:
        for error in errors:
            logger.log_error(f"❌ 配置错误: {error}")
        return EXIT_USAGE
    if Config.DEBUG_MODE:
        Config.print_config()

    cli = EhybCli(args)
    try:
        return getattr(cli, f'cmd_{args.command}')()
    except EhybError as e:
        logger.log_error(f"❌ {e}")
        return EXIT_USAGE
    except OSError as e:
        logger.log_error(f"❌ 文件错误: {e}")
        return EXIT_USAGE
    except ValueError as e:
        logger.log_error(f"❌ 参数错误: {e}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
