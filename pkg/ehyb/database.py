"""基准历史数据库"""
import sqlite3
from typing import List, Dict
import os


class Database:
    """基准/转换历史（SQLite）"""

    def __init__(self, db_path: str = 'data/bench_history.db'):
        self.db_path = db_path
        self._ensure_database()

    def _connect(self) -> sqlite3.Connection:
        conn = sqlite3.connect(self.db_path)
        conn.row_factory = sqlite3.Row
        return conn

    def _ensure_database(self):
        """确保数据库和表存在"""
        # 确保data目录存在
        directory = os.path.dirname(self.db_path)
        if directory:
            os.makedirs(directory, exist_ok=True)

        conn = sqlite3.connect(self.db_path)
        cursor = conn.cursor()

        # 基准记录表（与报告 schema v1 的主要列对应）
        cursor.execute('''
            CREATE TABLE IF NOT EXISTS bench_runs (
                id INTEGER PRIMARY KEY AUTOINCREMENT,
                timestamp DATETIME DEFAULT CURRENT_TIMESTAMP,
                matrix TEXT NOT NULL,
                kernel TEXT NOT NULL,
                precision TEXT NOT NULL,
                dimension INTEGER,
                nnz INTEGER,
                n_parts INTEGER,
                inner_fraction REAL,
                workers INTEGER,
                scheduling TEXT,
                median_time_s REAL,
                gflops REAL,
                preprocessing_ratio REAL,
                result_digest TEXT
            )
        ''')

        # 转换记录表
        cursor.execute('''
            CREATE TABLE IF NOT EXISTS conversions (
                id INTEGER PRIMARY KEY AUTOINCREMENT,
                timestamp DATETIME DEFAULT CURRENT_TIMESTAMP,
                matrix TEXT NOT NULL,
                dimension INTEGER,
                nnz INTEGER,
                tau INTEGER,
                n_parts INTEGER,
                vec_cache_size INTEGER,
                inner_fraction REAL,
                er_rows INTEGER,
                footprint_bytes INTEGER,
                partition_time_s REAL,
                reorder_time_s REAL
            )
        ''')

        conn.commit()
        conn.close()

    def add_bench_report(self, report):
        """添加一行基准报告（BenchReport）"""
        conn = sqlite3.connect(self.db_path)
        cursor = conn.cursor()

        cursor.execute('''
            INSERT INTO bench_runs (matrix, kernel, precision, dimension, nnz, n_parts, inner_fraction,
                                    workers, scheduling, median_time_s, gflops, preprocessing_ratio, result_digest)
            VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?)
        ''', (report.matrix, report.kernel, report.precision, int(report.dimension), int(report.nnz),
              int(report.n_parts), float(report.inner_fraction), int(report.workers), report.scheduling,
              float(report.median_time_s), float(report.gflops), float(report.preprocessing_ratio),
              report.result_digest))

        conn.commit()
        conn.close()

    def add_conversion(self, summary: Dict):
        """添加转换摘要（conversion_summary 的输出）"""
        conn = sqlite3.connect(self.db_path)
        cursor = conn.cursor()

        cursor.execute('''
            INSERT INTO conversions (matrix, dimension, nnz, tau, n_parts, vec_cache_size, inner_fraction,
                                     er_rows, footprint_bytes, partition_time_s, reorder_time_s)
            VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?)
        ''', (summary['matrix'], int(summary['dimension']), int(summary['nnz']), int(summary['tau']),
              int(summary['n_parts']), int(summary['vec_cache_size']), float(summary['inner_fraction']),
              int(summary['er_rows']), int(summary['footprint_bytes']),
              float(summary['partition_time_s']), float(summary['reorder_time_s'])))

        conn.commit()
        conn.close()

    def get_recent_reports(self, limit: int = 10) -> List[Dict]:
        """获取最近的基准记录"""
        conn = self._connect()
        cursor = conn.cursor()

        cursor.execute('''
            SELECT * FROM bench_runs ORDER BY id DESC LIMIT ?
        ''', (limit,))

        rows = cursor.fetchall()
        conn.close()

        return [dict(row) for row in rows]

    def get_recent_conversions(self, limit: int = 10) -> List[Dict]:
        conn = self._connect()
        cursor = conn.cursor()
        cursor.execute('SELECT * FROM conversions ORDER BY id DESC LIMIT ?', (limit,))
        rows = cursor.fetchall()
        conn.close()
        return [dict(row) for row in rows]

    def get_statistics(self) -> Dict:
        """获取统计数据"""
        conn = sqlite3.connect(self.db_path)
        cursor = conn.cursor()

        # 总基准行数
        cursor.execute('SELECT COUNT(*) FROM bench_runs')
        total_runs = cursor.fetchone()[0]

        # 覆盖的矩阵数
        cursor.execute('SELECT COUNT(DISTINCT matrix) FROM bench_runs')
        matrices = cursor.fetchone()[0]

        cursor.execute('SELECT COUNT(*) FROM conversions')
        conversions = cursor.fetchone()[0]

        # 各内核的最好/平均 GFLOPs
        cursor.execute('''
            SELECT kernel, COUNT(*), MAX(gflops), AVG(gflops), AVG(preprocessing_ratio)
            FROM bench_runs GROUP BY kernel ORDER BY kernel
        ''')
        per_kernel = {}
        for kernel, count, best, avg, ratio in cursor.fetchall():
            per_kernel[kernel] = {
                'runs': count,
                'best_gflops': round(best or 0, 4),
                'avg_gflops': round(avg or 0, 4),
                'avg_preprocessing_ratio': round(ratio or 0, 2),
            }

        conn.close()

        return {
            'total_runs': total_runs,
            'matrices': matrices,
            'conversions': conversions,
            'kernels': per_kernel,
        }
