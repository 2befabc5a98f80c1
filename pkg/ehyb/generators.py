"""测试/演示矩阵生成（stencil、随机稀疏、块对角）"""
import numpy as np
import scipy.sparse as sp

from .errors import ConfigError
from .matrix_io import CooMatrix

KINDS = ('identity', 'tridiagonal', 'laplace1d', 'laplace2d', 'laplace3d', 'random', 'block-diagonal')


def _from_scipy(a) -> CooMatrix:
    a = sp.coo_matrix(a)
    return CooMatrix.from_triplets(a.shape[0], a.shape[1], a.row, a.col, a.data)


def identity(n: int) -> CooMatrix:
    return CooMatrix.from_triplets(n, n, np.arange(n), np.arange(n), np.ones(n))


def tridiagonal(n: int, diag: float = 2.0, off: float = -1.0) -> CooMatrix:
    return _from_scipy(sp.diags([off, diag, off], [-1, 0, 1], shape=(n, n)))


def laplace1d(n: int) -> CooMatrix:
    return tridiagonal(n)


def laplace2d(nx: int, ny: int = None) -> CooMatrix:
    """5 点格式，(nx·ny)×(nx·ny)"""
    ny = ny or nx
    tx = sp.diags([-1.0, 2.0, -1.0], [-1, 0, 1], shape=(nx, nx))
    ty = sp.diags([-1.0, 2.0, -1.0], [-1, 0, 1], shape=(ny, ny))
    return _from_scipy(sp.kron(sp.identity(ny), tx) + sp.kron(ty, sp.identity(nx)))


def laplace3d(n: int) -> CooMatrix:
    """7 点格式，n³×n³"""
    t = sp.diags([-1.0, 2.0, -1.0], [-1, 0, 1], shape=(n, n))
    i = sp.identity(n)
    a = sp.kron(sp.kron(i, i), t) + sp.kron(sp.kron(i, t), i) + sp.kron(sp.kron(t, i), i)
    return _from_scipy(a)


def random_sparse(n: int, density: float, seed: int = 0) -> CooMatrix:
    """值域 [-1, 1) 的随机方阵"""
    rng = np.random.default_rng(seed)
    a = sp.random(n, n, density=density, format='coo', random_state=rng,
                  data_rvs=lambda k: rng.uniform(-1.0, 1.0, k))
    return _from_scipy(a)


def block_diagonal(n_blocks: int, block_size: int, seed: int = 0) -> CooMatrix:
    """稠密块对角矩阵，块之间没有耦合"""
    rng = np.random.default_rng(seed)
    blocks = [rng.uniform(-1.0, 1.0, (block_size, block_size)) for _ in range(n_blocks)]
    return _from_scipy(sp.block_diag(blocks))


def generate(kind: str, n: int, density: float = 0.01, seed: int = 0) -> CooMatrix:
    """按名称生成；laplace2d/3d 的 n 为每维网格点数"""
    if n < 1:
        raise ConfigError(f"matrix size must be >= 1, got {n}")
    if not 0.0 <= density <= 1.0:
        raise ConfigError(f"density must be in [0, 1], got {density}")
    if kind == 'identity':
        return identity(n)
    if kind in ('tridiagonal', 'laplace1d'):
        return tridiagonal(n)
    if kind == 'laplace2d':
        return laplace2d(n)
    if kind == 'laplace3d':
        return laplace3d(n)
    if kind == 'random':
        return random_sparse(n, density, seed)
    if kind == 'block-diagonal':
        return block_diagonal(max(n // 8, 1), 8, seed)
    raise ConfigError(f"unknown matrix kind {kind!r}; choose from {', '.join(KINDS)}")
