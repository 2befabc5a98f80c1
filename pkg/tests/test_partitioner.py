import io
import itertools
import time

import numpy as np
import pytest

from ehyb.errors import DimensionMismatchError, InfeasibleCapacityError, NotSquareError, PartitionFileError
from ehyb.generators import block_diagonal, identity, laplace2d, random_sparse, tridiagonal
from ehyb.matrix_io import CooMatrix
from ehyb.partitioner import (
    PartitionMap,
    build_graph,
    contiguous_partition,
    cut_metrics,
    edge_cut,
    load_partition_file,
    partition_graph,
    random_partition,
    rebalance_partition,
    save_partition_file,
)


def test_graph_of_identity_has_no_edges():
    g = build_graph(identity(4))
    assert g.n_vertices == 4
    assert g.n_edges == 0


def test_graph_of_tridiagonal_is_a_chain():
    g = build_graph(tridiagonal(4))
    assert [g.neighbors(v).tolist() for v in range(4)] == [[1], [0, 2], [1, 3], [2]]


def test_graph_symmetrizes_one_sided_entries():
    g = build_graph(CooMatrix.from_triplets(6, 6, [2], [5], [1.0]))
    assert g.neighbors(2).tolist() == [5]
    assert g.neighbors(5).tolist() == [2]


def test_graph_rejects_rectangular():
    with pytest.raises(NotSquareError, match='matrix must be square'):
        build_graph(CooMatrix.empty(3, 4))


def test_chain_of_eight_splits_in_halves():
    g = build_graph(tridiagonal(8))
    p = partition_graph(g, 2, 4)
    halves = {tuple(p.members(0)), tuple(p.members(1))}
    assert halves == {(0, 1, 2, 3), (4, 5, 6, 7)}
    assert edge_cut(g, p) == 1


def test_min_cut_of_chain_matches_brute_force():
    g = build_graph(tridiagonal(8))
    best = min(
        edge_cut(g, PartitionMap(2, [1 if v in left else 0 for v in range(8)]))
        for left in itertools.combinations(range(8), 4)
    )
    assert best == edge_cut(g, partition_graph(g, 2, 4))


def test_single_part():
    g = build_graph(laplace2d(5))
    p = partition_graph(g, 1, 25)
    assert p.assignment.tolist() == [0] * 25
    assert edge_cut(g, p) == 0


def test_grid_beats_random_partition():
    m = laplace2d(16)
    g = build_graph(m)
    p = partition_graph(g, 4, 64)
    baseline = random_partition(256, 4, 64, seed=0)
    assert cut_metrics(m, p)[2] > cut_metrics(m, baseline)[2]


@pytest.mark.parametrize('nx', [64, 128])
def test_grid_sixteen_parts_beats_mean_random(nx):
    m = laplace2d(nx)
    n = nx * nx
    capacity = -(-n // 16)
    built = cut_metrics(m, partition_graph(build_graph(m), 16, capacity))[2]
    randoms = [cut_metrics(m, random_partition(n, 16, capacity, seed=s))[2] for s in range(10)]
    assert built > np.mean(randoms)


@pytest.mark.parametrize('seed', range(5))
def test_capacity_always_respected(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(10, 400))
    m = random_sparse(n, float(rng.uniform(0.001, 0.05)), seed=seed)
    n_parts = int(rng.integers(2, 12))
    capacity = -(-n // n_parts) + int(rng.integers(0, 4))
    p = partition_graph(build_graph(m), n_parts, capacity, seed=seed)
    assert p.n_vertices == n
    assert p.part_sizes.sum() == n
    assert p.part_sizes.max() <= capacity


def test_partition_is_deterministic():
    g = build_graph(random_sparse(200, 0.02, seed=4))
    a = partition_graph(g, 5, 45, seed=9)
    b = partition_graph(g, 5, 45, seed=9)
    np.testing.assert_array_equal(a.assignment, b.assignment)


def test_isolated_vertices_fill_parts_round_robin():
    p = partition_graph(build_graph(identity(10)), 3, 4)
    assert sorted(p.part_sizes.tolist()) == [3, 3, 4]


def test_infeasible_capacity():
    with pytest.raises(InfeasibleCapacityError):
        partition_graph(build_graph(identity(10)), 2, 4)


def test_rebalance_moves_overflow():
    g = build_graph(tridiagonal(8))
    p = rebalance_partition(g, PartitionMap(2, [0, 0, 0, 0, 0, 0, 1, 1]), 4)
    assert p.part_sizes.tolist() == [4, 4]
    assert edge_cut(g, p) == 1


def _slow_rebalance(g, p, capacity):
    """逐点重扫的朴素版本，只用来对照结果"""
    assignment = p.assignment.copy()
    sizes = np.bincount(assignment, minlength=p.n_parts)
    for part in np.flatnonzero(sizes > capacity):
        while sizes[part] > capacity:
            best = None
            for v in np.flatnonzero(assignment == part):
                owners = assignment[g.neighbors(v)]
                cut = int(np.count_nonzero(owners != part))
                open_parts = [int(q) for q in set(owners.tolist()) if q != part and sizes[q] < capacity]
                if open_parts:
                    key = (-cut, int(v), min(open_parts, key=lambda q: (sizes[q], q)))
                    best = key if best is None or key < best else best
            if best is None:
                v = int(np.flatnonzero(assignment == part)[-1])
                dest = int(np.argmin(np.where(np.arange(p.n_parts) == part, np.iinfo(np.int64).max, sizes)))
            else:
                _, v, dest = best
            assignment[v] = dest
            sizes[part] -= 1
            sizes[dest] += 1
    return assignment


@pytest.mark.parametrize('seed', range(12))
def test_rebalance_matches_full_rescan(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(20, 120))
    g = build_graph(random_sparse(n, float(rng.uniform(0.01, 0.08)), seed=seed))
    n_parts = int(rng.integers(2, 6))
    capacity = -(-n // n_parts) + int(rng.integers(0, 3))
    # 偏斜的初始划分，让多个分区超容
    skewed = PartitionMap(n_parts, np.minimum(rng.integers(0, n_parts, n), rng.integers(0, n_parts, n)))
    fast = rebalance_partition(g, skewed, capacity)
    assert fast.assignment.tolist() == _slow_rebalance(g, skewed, capacity).tolist()
    assert fast.part_sizes.max() <= capacity


def test_rebalance_isolated_vertices_use_emptiest_part():
    g = build_graph(identity(12))
    p = rebalance_partition(g, PartitionMap(3, np.zeros(12)), 4)
    assert p.part_sizes.tolist() == [4, 4, 4]
    assert p.assignment[:4].tolist() == [0, 0, 0, 0]


def test_rebalance_single_part_grid_is_fast():
    g = build_graph(laplace2d(64))
    start = time.perf_counter()
    p = rebalance_partition(g, PartitionMap(16, np.zeros(4096)), 256)
    elapsed = time.perf_counter() - start
    assert p.part_sizes.tolist() == [256] * 16
    assert elapsed < 5.0
    assert edge_cut(g, p) < edge_cut(g, random_partition(4096, 16, 256, seed=0))


def test_cut_metrics_single_part_is_all_inner():
    m = random_sparse(30, 0.1, seed=1)
    assert cut_metrics(m, PartitionMap(1, np.zeros(30, dtype=int)))[2] == 1.0


def test_cut_metrics_tridiagonal_halves(tridiag8):
    inner, extra, fraction = cut_metrics(tridiag8, PartitionMap(2, np.arange(8) // 4))
    assert (inner, extra) == (20, 2)
    assert fraction == pytest.approx(20 / 22)


def test_cut_metrics_block_diagonal_aligned():
    m = block_diagonal(4, 8, seed=0)
    assert cut_metrics(m, PartitionMap(4, np.arange(32) // 8))[1] == 0


def test_cut_metrics_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        cut_metrics(identity(4), PartitionMap(1, [0, 0, 0]))


def test_merging_parts_never_loses_inner_entries():
    m = random_sparse(100, 0.05, seed=2)
    p = random_partition(100, 4, 25, seed=3)
    merged = PartitionMap(3, np.where(p.assignment == 3, 2, p.assignment))
    assert cut_metrics(m, merged)[0] >= cut_metrics(m, p)[0]


@pytest.mark.parametrize('n_parts', [2, 4, 7])
def test_chain_contiguous_blocks_cut(n_parts):
    m = tridiagonal(70)
    p = contiguous_partition(70, n_parts, -(-70 // n_parts))
    assert cut_metrics(m, p)[1] == 2 * (n_parts - 1)


def test_load_partition_file():
    p = load_partition_file(io.StringIO("0\n0\n1\n1\n"), 4)
    assert p.n_parts == 2
    assert p.part_sizes.tolist() == [2, 2]


def test_partition_file_round_trip(tmp_path):
    p = random_partition(20, 3, 7, seed=1)
    path = tmp_path / 'parts.txt'
    save_partition_file(p, str(path))
    back = load_partition_file(str(path), 20, 3)
    np.testing.assert_array_equal(back.assignment, p.assignment)


@pytest.mark.parametrize('text,n_parts', [
    ("0\n1\n1\n", None),
    ("0\n1\n-1\n1\n", None),
    ("0\n1\nx\n1\n", None),
    ("0\n1\n2\n1\n", 2),
])
def test_bad_partition_files(text, n_parts):
    with pytest.raises(PartitionFileError):
        load_partition_file(io.StringIO(text), 4, n_parts)
