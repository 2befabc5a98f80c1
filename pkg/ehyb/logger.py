"""日志记录模块"""
import os
import logging
from datetime import datetime
from typing import Dict, Any
from config import Config


class EhybLogger:
    """EHYB 日志记录器"""

    def __init__(self):
        """初始化日志"""
        level = logging.DEBUG if Config.DEBUG_MODE else logging.INFO

        # 主日志：控制台（stderr）+ 按日期的文件
        self.logger = logging.getLogger('EHYB')
        self.logger.setLevel(level)

        formatter = logging.Formatter(
            '%(asctime)s - %(levelname)s - %(message)s',
            datefmt='%Y-%m-%d %H:%M:%S'
        )

        if Config.LOG_TO_FILE:
            os.makedirs(Config.LOG_DIR, exist_ok=True)

        # 避免重复添加handler
        if not self.logger.handlers:
            console_handler = logging.StreamHandler()
            console_handler.setLevel(level)
            console_handler.setFormatter(formatter)
            self.logger.addHandler(console_handler)

            if Config.LOG_TO_FILE:
                today = datetime.now().strftime('%Y%m%d')
                file_handler = logging.FileHandler(
                    os.path.join(Config.LOG_DIR, f'ehyb_{today}.log'), encoding='utf-8')
                file_handler.setLevel(level)
                file_handler.setFormatter(formatter)
                self.logger.addHandler(file_handler)

        # 库内模块（ehyb.partitioner 等）的 DEBUG 细节挂到同一组 handler
        lib_logger = logging.getLogger('ehyb')
        lib_logger.setLevel(level)
        if not lib_logger.handlers:
            for handler in self.logger.handlers:
                lib_logger.addHandler(handler)
            lib_logger.propagate = False

        # 基准报告日志（独立文件）
        self.bench_logger = logging.getLogger('EHYBBench')
        self.bench_logger.setLevel(logging.INFO)

        if not self.bench_logger.handlers and Config.LOG_TO_FILE:
            today = datetime.now().strftime('%Y%m%d')
            bench_handler = logging.FileHandler(
                os.path.join(Config.LOG_DIR, f'bench_{today}.log'), encoding='utf-8')
            bench_handler.setLevel(logging.INFO)
            bench_handler.setFormatter(logging.Formatter(
                '%(asctime)s - %(message)s',
                datefmt='%Y-%m-%d %H:%M:%S'
            ))
            self.bench_logger.addHandler(bench_handler)
        # 不传播到父logger，避免重复
        self.bench_logger.propagate = False

    def log_conversion(self, summary: Dict[str, Any]):
        """记录一次转换摘要"""
        self.logger.info(
            f"✓ 转换完成 {summary.get('matrix', '')}: n={summary['dimension']} nnz={summary['nnz']} "
            f"分区={summary['n_parts']} 缓存={summary['vec_cache_size']} "
            f"inner={summary['inner_fraction']:.4f} ER行={summary['er_rows']}"
        )

    def log_bench_report(self, report):
        """记录基准报告（写入独立的 bench 日志）"""
        log_msg = f"""
{'='*80}
基准记录
{'='*80}
矩阵: {report.matrix}   内核: {report.kernel}   精度: {report.precision}
规模: n={report.dimension} nnz={report.nnz} 分区={report.n_parts} 缓存={report.vec_cache_size}
inner比例: {report.inner_fraction:.4f}   ELL/ER: {report.ell_nnz}/{report.er_nnz}
中位耗时: {report.median_time_s * 1e3:.3f} ms   GFLOPs: {report.gflops:.4f}
预处理: 划分 {report.partition_time_s:.4f}s + 重排 {report.reorder_time_s:.4f}s = {report.preprocessing_ratio:.1f}× SpMV
{'='*80}
"""
        self.bench_logger.info(log_msg)
        self.logger.info(
            f"{report.kernel}: {report.median_time_s * 1e3:.3f} ms, {report.gflops:.4f} GFLOPs")

    def log_verification(self, result: Dict[str, Any]):
        """记录校验结果"""
        if result['success']:
            self.logger.info(f"✓ 校验通过，最大相对误差 {result['max_rel_error']:.3e}")
        else:
            self.logger.error(
                f"❌ 校验失败：seed={result['failed_seed']} 相对误差 {result['max_rel_error']:.3e} "
                f"> 容差 {result['tolerance']:.1e}")

    def log_error(self, error_msg: str):
        """记录错误"""
        self.logger.error(error_msg)

    def log_info(self, info_msg: str):
        """记录信息"""
        self.logger.info(info_msg)

    def log_warning(self, warning_msg: str):
        """记录警告"""
        self.logger.warning(warning_msg)

# 全局logger实例
_logger_instance = None

def get_logger() -> EhybLogger:
    """获取全局logger实例"""
    global _logger_instance
    if _logger_instance is None:
        _logger_instance = EhybLogger()
    return _logger_instance
