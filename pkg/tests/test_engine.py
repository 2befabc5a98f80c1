import dataclasses
import threading

import numpy as np
import pytest

from ehyb.bench import lcg_vector
from ehyb.engine import (
    ExecutionConfig,
    SliceCounter,
    spmv_csr,
    spmv_ehyb,
    spmv_ehyb_user,
    traffic_breakdown,
    traffic_model,
)
from ehyb.errors import ConfigError, NotAssembledError, VectorLengthError
from ehyb.format import DeviceProfile, EhybParams, build_ehyb, compute_params, permute_vector
from ehyb.generators import block_diagonal, identity, laplace1d, laplace2d, laplace3d, random_sparse, tridiagonal
from ehyb.matrix_io import CooMatrix, coo_to_csr
from ehyb.partitioner import PartitionMap, build_graph, cut_metrics, partition_graph, random_partition

SCHEDULES = [(w, s) for w in (1, 2, 8) for s in ('static', 'stealing')]


def _pipeline(m, profile, tau=8, seed=0):
    params = compute_params(m.n_rows, tau, profile)
    p = partition_graph(build_graph(m), params.n_parts, params.vec_cache_size, seed=seed)
    return build_ehyb(m, p, params), p


def _rel_err(y, ref):
    scale = np.max(np.abs(ref)) if ref.size else 0.0
    diff = np.max(np.abs(y - ref)) if y.size else 0.0
    return diff / scale if scale > 0 else diff


def test_csr_identity_and_zero():
    x = np.array([1.0, -2.0, 3.5])
    np.testing.assert_array_equal(spmv_csr(coo_to_csr(identity(3)), x), x)
    np.testing.assert_array_equal(spmv_csr(coo_to_csr(CooMatrix.empty(3, 3)), x), np.zeros(3))


def test_csr_hand_example():
    m = CooMatrix.from_triplets(2, 2, [0, 0, 1], [0, 1, 1], [1.0, 2.0, 3.0])
    np.testing.assert_array_equal(spmv_csr(coo_to_csr(m), [1.0, 1.0]), [3.0, 3.0])


def test_csr_length_mismatch():
    with pytest.raises(VectorLengthError):
        spmv_csr(coo_to_csr(identity(3)), np.ones(4))


def test_identity_has_no_uncached_loads():
    m = identity(40)
    e, _ = _pipeline(m, DeviceProfile(num_processors=3, warp_size=4, shm_max=128))
    x = lcg_vector(40, 1)
    y, stats = spmv_ehyb(e, permute_vector(x, e.plan))
    assert stats.uncached_loads == 0
    np.testing.assert_array_equal(spmv_ehyb_user(e, x), x)


def test_tridiagonal_matches_oracle_exactly(tridiag8, tiny_profile):
    params = compute_params(8, 8, tiny_profile)
    e = build_ehyb(tridiag8, PartitionMap(2, np.arange(8) // 4), params)
    ones = np.ones(8)
    np.testing.assert_array_equal(spmv_ehyb_user(e, ones), spmv_csr(coo_to_csr(tridiag8), ones))
    _, stats = spmv_ehyb(e, permute_vector(ones, e.plan))
    assert stats.uncached_loads == 2
    assert stats.cached_loads == 20


def test_zero_vector_gives_zero():
    m = random_sparse(64, 0.1, seed=3)
    e, _ = _pipeline(m, DeviceProfile(num_processors=4, warp_size=4, shm_max=256))
    np.testing.assert_array_equal(spmv_ehyb_user(e, np.zeros(64)), np.zeros(64))


@pytest.mark.parametrize('seed', range(100))
def test_random_partitions_match_oracle(seed):
    m = random_sparse(64, 0.02 + 0.001 * seed, seed=seed)
    params = EhybParams(K=1, n_parts=4, vec_cache_size=16, tau=8, warp_size=4)
    p = random_partition(64, 4, 16, seed=seed)
    e = build_ehyb(m, p, params)
    x = lcg_vector(64, seed)
    assert _rel_err(spmv_ehyb_user(e, x), spmv_csr(coo_to_csr(m), x)) <= 1e-12


@pytest.mark.parametrize('make', [
    lambda: laplace1d(4096),
    lambda: laplace2d(32),
    lambda: laplace2d(64, 16),
    lambda: laplace3d(12),
    lambda: block_diagonal(16, 8, seed=4),
])
def test_stencils_match_oracle(make):
    m = make()
    e, _ = _pipeline(m, DeviceProfile(num_processors=8, warp_size=32, shm_max=4096))
    x = lcg_vector(m.n_rows, 7)
    assert _rel_err(spmv_ehyb_user(e, x), spmv_csr(coo_to_csr(m), x)) <= 1e-12


@pytest.mark.parametrize('n,density', [(8, 0.1), (100, 0.05), (257, 0.01), (512, 0.001)])
def test_single_precision_within_tolerance(n, density):
    m = random_sparse(n, density, seed=n)
    e, _ = _pipeline(m, DeviceProfile(num_processors=4, warp_size=8, shm_max=1024), tau=4)
    x = lcg_vector(n, 5).astype(np.float32).astype(np.float64)
    y = spmv_ehyb_user(e, x)
    assert y.dtype == np.float32
    assert _rel_err(y.astype(np.float64), spmv_csr(coo_to_csr(m), x)) <= 1e-5


@pytest.mark.parametrize('seed', range(5))
def test_schedule_invariance(seed):
    m = random_sparse(300, 0.02, seed=seed)
    e, _ = _pipeline(m, DeviceProfile(num_processors=5, warp_size=8, shm_max=512), seed=seed)
    x = permute_vector(lcg_vector(300, seed), e.plan)
    reference, _ = spmv_ehyb(e, x, ExecutionConfig())
    for workers, scheduling in SCHEDULES:
        for warps in (1, 3):
            cfg = ExecutionConfig(worker_count=workers, scheduling=scheduling, warps_per_block=warps)
            y, _ = spmv_ehyb(e, x, cfg)
            assert y.tobytes() == reference.tobytes(), (workers, scheduling, warps)


def test_stats_conservation():
    m = laplace2d(20)
    e, p = _pipeline(m, DeviceProfile(num_processors=4, warp_size=4, shm_max=1024))
    _, stats = spmv_ehyb(e, permute_vector(lcg_vector(400, 2), e.plan),
                         ExecutionConfig(worker_count=2, scheduling='stealing'))
    inner, extra, _ = cut_metrics(m, p)
    assert stats.cached_loads + stats.uncached_loads == m.nnz
    assert stats.cached_loads == inner
    assert stats.uncached_loads == extra
    assert stats.flops == 2 * m.nnz
    assert stats.bytes_touched_model == traffic_model(e)
    spp = e.params.slices_per_part
    assert stats.per_block_slices == [spp] * e.params.n_parts
    assert all(sum(w) == spp for w in stats.per_warp_slices)
    assert sum(stats.er_slices_per_worker) == e.n_slices_er


def test_static_warps_take_fixed_stride():
    m = identity(64)
    params = EhybParams(K=1, n_parts=2, vec_cache_size=32, tau=8, warp_size=4)
    e = build_ehyb(m, PartitionMap(2, np.arange(64) // 32), params)
    _, stats = spmv_ehyb(e, permute_vector(np.ones(64), e.plan),
                         ExecutionConfig(scheduling='static', warps_per_block=3))
    assert stats.per_warp_slices == [[3, 3, 2], [3, 3, 2]]


def test_phase_barrier_in_trace():
    m = random_sparse(200, 0.03, seed=8)
    e, _ = _pipeline(m, DeviceProfile(num_processors=4, warp_size=4, shm_max=512))
    assert e.n_slices_er > 0
    for workers, scheduling in SCHEDULES:
        cfg = ExecutionConfig(worker_count=workers, scheduling=scheduling, record_trace=True)
        _, stats = spmv_ehyb(e, permute_vector(np.ones(200), e.plan), cfg)
        phases = [phase for phase, _ in stats.trace]
        assert phases.count('ell') == e.params.n_parts
        assert phases.count('er') == e.n_slices_er
        last_ell = max(i for i, ph in enumerate(phases) if ph == 'ell')
        first_er = min(i for i, ph in enumerate(phases) if ph == 'er')
        assert last_ell < first_er


def test_linearity():
    m = laplace2d(16)
    e, _ = _pipeline(m, DeviceProfile(num_processors=4, warp_size=8, shm_max=512))
    x = lcg_vector(256, 3)
    y = spmv_ehyb_user(e, x)
    assert _rel_err(spmv_ehyb_user(e, 2.5 * x), 2.5 * y) <= 1e-12


def test_input_validation():
    e, _ = _pipeline(identity(8), DeviceProfile(num_processors=2, warp_size=4, shm_max=64))
    with pytest.raises(VectorLengthError):
        spmv_ehyb(e, np.ones(7))
    with pytest.raises(VectorLengthError):
        spmv_ehyb_user(e, np.ones(9))
    with pytest.raises(NotAssembledError):
        spmv_ehyb(coo_to_csr(identity(8)), np.ones(8))
    broken = dataclasses.replace(e, val_ell=e.val_ell[:-1])
    with pytest.raises(NotAssembledError):
        spmv_ehyb(broken, np.ones(e.padded_dimension))


def test_execution_config_validation():
    with pytest.raises(ConfigError):
        ExecutionConfig(worker_count=0)
    with pytest.raises(ConfigError):
        ExecutionConfig(scheduling='random')
    with pytest.raises(ConfigError):
        ExecutionConfig(warps_per_block=0)


def test_slice_counter_hands_out_each_slice_once():
    counter = SliceCounter(5, 505)
    claimed = []
    lock = threading.Lock()

    def worker():
        while (s := counter.claim()) is not None:
            with lock:
                claimed.append(s)

    threads = [threading.Thread(target=worker) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert sorted(claimed) == list(range(5, 505))


def test_traffic_identity_formula():
    n = 16
    params = EhybParams(K=1, n_parts=2, vec_cache_size=8, tau=4, warp_size=4)
    e = build_ehyb(identity(n), PartitionMap(2, np.arange(n) // 8), params)
    parts = traffic_breakdown(e)
    assert parts['ell_slot_bytes'] == n * 6
    assert parts['er_slot_bytes'] == 0 and parts['uncached_x_bytes'] == 0
    assert traffic_model(e) == n * 6 + parts['metadata_bytes'] + 2 * n * 4


def test_traffic_empty_matrix():
    e, _ = _pipeline(CooMatrix.empty(10, 10), DeviceProfile(num_processors=2, warp_size=2, shm_max=64))
    parts = traffic_breakdown(e)
    assert traffic_model(e) == parts['metadata_bytes'] + 2 * 10 * e.params.tau


def test_traffic_slot_ratio_between_precisions():
    m = tridiagonal(32)
    params = EhybParams(K=1, n_parts=1, vec_cache_size=32, tau=4, warp_size=8)
    e = build_ehyb(m, PartitionMap(1, np.zeros(32, dtype=int)), params)
    assert traffic_breakdown(e, 4)['ell_slot_bytes'] / traffic_breakdown(e, 8)['ell_slot_bytes'] == pytest.approx(6 / 10)
