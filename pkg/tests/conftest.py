import logging
import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from config import Config  # noqa: E402
from ehyb import logger as ehyb_logger  # noqa: E402
from ehyb.format import DeviceProfile  # noqa: E402
from ehyb.generators import tridiagonal  # noqa: E402


@pytest.fixture(autouse=True)
def isolated_config(tmp_path, monkeypatch):
    """日志与历史库写到临时目录，每个用例重建 logger"""
    monkeypatch.setattr(Config, 'LOG_DIR', str(tmp_path / 'logs'))
    monkeypatch.setattr(Config, 'DATABASE_PATH', str(tmp_path / 'data' / 'bench_history.db'))
    monkeypatch.setattr(Config, 'PANEL_TOKEN', '')
    monkeypatch.setattr(Config, 'DEBUG_MODE', False)
    monkeypatch.setattr(ehyb_logger, '_logger_instance', None)
    yield
    for name in ('EHYB', 'EHYBBench', 'ehyb'):
        lg = logging.getLogger(name)
        for handler in list(lg.handlers):
            lg.removeHandler(handler)
            handler.close()


@pytest.fixture
def tiny_profile():
    """P=2, warp=4, 64 字节共享内存"""
    return DeviceProfile(num_processors=2, warp_size=4, shm_max=64)


@pytest.fixture
def tridiag8():
    return tridiagonal(8)


@pytest.fixture
def write_mtx(tmp_path):
    """把 CooMatrix 写到临时 .mtx 并返回路径"""
    from ehyb.matrix_io import write_matrix_market

    def _write(m, name='matrix.mtx'):
        path = tmp_path / name
        write_matrix_market(m, str(path))
        return str(path)
    return _write
