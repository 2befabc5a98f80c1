"""配置管理"""
import os
from dotenv import load_dotenv

load_dotenv()


class Config:
    """系统配置（命令行参数可逐次覆盖）"""

    # 模拟设备（默认对应 Tesla V100：80 SM，warp 32，48 KiB 共享内存）
    DEVICE_PROCESSORS = int(os.getenv('DEVICE_PROCESSORS', '80'))
    WARP_SIZE = int(os.getenv('WARP_SIZE', '32'))
    SHM_MAX_BYTES = int(os.getenv('SHM_MAX_BYTES', '49152'))
    VALUE_BYTES = int(os.getenv('VALUE_BYTES', '8'))  # τ：4=单精度，8=双精度

    # 预处理
    PARTITION_SEED = int(os.getenv('PARTITION_SEED', '0'))

    # 执行
    WORKERS = int(os.getenv('WORKERS', '1'))
    SCHEDULING = os.getenv('SCHEDULING', 'stealing')
    WARPS_PER_BLOCK = int(os.getenv('WARPS_PER_BLOCK', '4'))

    # 基准测试
    BENCH_REPS = int(os.getenv('BENCH_REPS', '50'))
    BENCH_WARMUP = int(os.getenv('BENCH_WARMUP', '5'))
    REPORT_FORMAT = os.getenv('REPORT_FORMAT', 'csv')
    BASELINE_TRIALS = int(os.getenv('BASELINE_TRIALS', '5'))

    # 校验
    VERIFY_VECTORS = int(os.getenv('VERIFY_VECTORS', '3'))
    VERIFY_SEED = int(os.getenv('VERIFY_SEED', '12345'))
    TOLERANCE_F64 = float(os.getenv('TOLERANCE_F64', '1e-12'))
    TOLERANCE_F32 = float(os.getenv('TOLERANCE_F32', '1e-5'))

    # 日志配置
    DEBUG_MODE = os.getenv('DEBUG_MODE', 'false').lower() == 'true'  # 输出各阶段 DEBUG 日志
    LOG_TO_FILE = os.getenv('LOG_TO_FILE', 'true').lower() == 'true'
    BASE_DIR = os.path.dirname(os.path.abspath(__file__))
    LOG_DIR = os.getenv('LOG_DIR', os.path.join(BASE_DIR, 'logs'))

    # 基准历史数据库
    RECORD_HISTORY = os.getenv('RECORD_HISTORY', 'true').lower() == 'true'
    DATABASE_PATH = os.getenv('DATABASE_PATH', os.path.join(BASE_DIR, 'data', 'bench_history.db'))

    # 报告面板
    WEB_PORT = int(os.getenv('WEB_PORT', '8000'))
    PANEL_TOKEN = os.getenv('PANEL_TOKEN', '')

    @classmethod
    def device_profile(cls):
        from ehyb.format import DeviceProfile
        return DeviceProfile(cls.DEVICE_PROCESSORS, cls.WARP_SIZE, cls.SHM_MAX_BYTES)

    @classmethod
    def tolerance_for(cls, tau: int) -> float:
        return cls.TOLERANCE_F32 if tau == 4 else cls.TOLERANCE_F64

    @classmethod
    def validate_config(cls):
        """验证配置是否合法"""
        errors = []

        if cls.VALUE_BYTES not in (4, 8):
            errors.append(f'VALUE_BYTES必须为4或8，当前{cls.VALUE_BYTES}')
        if cls.DEVICE_PROCESSORS < 1:
            errors.append('DEVICE_PROCESSORS必须为正数')
        if cls.WARP_SIZE < 1:
            errors.append('WARP_SIZE必须为正数')
        if cls.SHM_MAX_BYTES <= 0:
            errors.append('SHM_MAX_BYTES必须为正数')
        elif cls.WARP_SIZE * cls.VALUE_BYTES > cls.SHM_MAX_BYTES:
            errors.append('SHM_MAX_BYTES放不下一个warp的向量缓存')
        if cls.SCHEDULING not in ('static', 'stealing'):
            errors.append(f'SCHEDULING只能是static或stealing，当前{cls.SCHEDULING}')
        if cls.WORKERS < 1:
            errors.append('WORKERS必须>=1')
        if cls.BENCH_REPS < 1:
            errors.append('BENCH_REPS必须>=1')
        if cls.BENCH_WARMUP < 0:
            errors.append('BENCH_WARMUP不能为负')

        return errors

    @classmethod
    def print_config(cls):
        """打印配置信息（stderr，避免污染结构化输出）"""
        import sys
        out = sys.stderr
        print("=" * 50, file=out)
        print("系统配置:", file=out)
        print(f"  设备: P={cls.DEVICE_PROCESSORS} warp={cls.WARP_SIZE} shm={cls.SHM_MAX_BYTES}B", file=out)
        print(f"  精度: τ={cls.VALUE_BYTES}", file=out)
        print(f"  执行: workers={cls.WORKERS} 调度={cls.SCHEDULING}", file=out)
        print(f"  基准: reps={cls.BENCH_REPS} warmup={cls.BENCH_WARMUP}", file=out)
        print(f"  调试模式: {'是' if cls.DEBUG_MODE else '否'}", file=out)
        print("=" * 50, file=out)
