import dataclasses
import io
import struct
import zlib

import numpy as np
import pytest

from ehyb import container
from ehyb.container import read_ehyb_container, write_ehyb_container
from ehyb.errors import (
    ContainerChecksumError,
    ContainerMagicError,
    ContainerTruncatedError,
    ContainerVersionError,
    NotAssembledError,
)
from ehyb.format import DeviceProfile, EhybParams, build_ehyb, coo_digest, compute_params, ehyb_to_coo
from ehyb.generators import block_diagonal, laplace2d, random_sparse, tridiagonal
from ehyb.partitioner import PartitionMap, build_graph, partition_graph

ARRAYS = ('val_ell', 'col_ell', 'position_ell', 'width_ell', 'row_width_ell',
          'val_er', 'col_er', 'position_er', 'width_er', 'row_width_er')
PLAN = ('reorder_table', 'inverse_table', 'arrange_table', 'y_idx_er', 'part_boundary')


def _assembled(m, tau=8, profile=None):
    profile = profile or DeviceProfile(num_processors=4, warp_size=8, shm_max=512)
    params = compute_params(m.n_rows, tau, profile)
    p = partition_graph(build_graph(m), params.n_parts, params.vec_cache_size)
    return build_ehyb(m, p, params)


def _blob(e) -> bytes:
    buf = io.BytesIO()
    write_ehyb_container(e, buf)
    return buf.getvalue()


def _assert_same(a, b):
    assert a.params == b.params
    assert a.nnz == b.nnz
    assert a.dimension == b.dimension and a.padded_dimension == b.padded_dimension
    for name in ARRAYS:
        x, y = getattr(a, name), getattr(b, name)
        assert x.dtype == y.dtype, name
        assert x.tobytes() == y.tobytes(), name
    for name in PLAN:
        np.testing.assert_array_equal(getattr(a.plan, name), getattr(b.plan, name))


@pytest.mark.parametrize('tau', [4, 8])
def test_round_trip_is_bit_exact(tau):
    e = _assembled(random_sparse(150, 0.04, seed=tau), tau=tau)
    _assert_same(e, read_ehyb_container(_blob(e)))


def test_round_trip_through_file(tmp_path):
    e = _assembled(laplace2d(10))
    path = tmp_path / 'm.ehyb'
    write_ehyb_container(e, str(path))
    _assert_same(e, read_ehyb_container(str(path)))


def test_empty_er_round_trip():
    m = block_diagonal(4, 8, seed=3)
    params = EhybParams(K=1, n_parts=4, vec_cache_size=8, tau=8, warp_size=8)
    e = build_ehyb(m, PartitionMap(4, np.arange(32) // 8), params)
    back = read_ehyb_container(_blob(e))
    assert back.val_er.size == 0 and back.col_er.size == 0 and back.y_idx_er.size == 0
    _assert_same(e, back)


def test_header_layout():
    blob = _blob(_assembled(laplace2d(4)))
    magic, version, tau = struct.unpack_from('<4sII', blob)
    assert (magic, version, tau) == (b'EHYB', 1, 8)


def test_bad_magic():
    blob = bytearray(_blob(_assembled(laplace2d(4))))
    blob[:4] = b'NOPE'
    with pytest.raises(ContainerMagicError):
        read_ehyb_container(bytes(blob))


def test_bad_version():
    blob = bytearray(_blob(_assembled(laplace2d(4))))
    struct.pack_into('<I', blob, 4, 99)
    with pytest.raises(ContainerVersionError):
        read_ehyb_container(bytes(blob))


def test_corrupted_length_field_fails_checksum():
    blob = bytearray(_blob(_assembled(laplace2d(4))))
    # 第一个字段的名称长度（header 12 字节 + 字段数 4 字节）
    struct.pack_into('<H', blob, 16, 0xFFFF)
    with pytest.raises(ContainerChecksumError):
        read_ehyb_container(bytes(blob))


def test_corrupted_value_fails_checksum():
    blob = bytearray(_blob(_assembled(laplace2d(4))))
    blob[len(blob) // 2] ^= 0x01
    with pytest.raises(ContainerChecksumError):
        read_ehyb_container(io.BytesIO(bytes(blob)))


def test_truncated_stream():
    blob = _blob(_assembled(laplace2d(4)))
    with pytest.raises(ContainerTruncatedError):
        read_ehyb_container(blob[:10])
    with pytest.raises((ContainerTruncatedError, ContainerChecksumError)):
        read_ehyb_container(blob[:-7])


def _unchecked_blob(e) -> bytes:
    """不经过 validate 直接编码，模拟外部写出的不一致容器"""
    payload = container._encode_payload(e)
    return (struct.pack('<4sII', b'EHYB', 1, e.params.tau) + payload
            + struct.pack('<I', zlib.crc32(payload)))


def _with_plan(e, **changes):
    return dataclasses.replace(e, plan=dataclasses.replace(e.plan, **changes))


def _with_array(e, name, index, value):
    arr = getattr(e, name).copy()
    arr[index] = value
    return dataclasses.replace(e, **{name: arr})


def _with_plan_entry(e, name, index, value):
    arr = getattr(e.plan, name).copy()
    arr[index] = value
    return _with_plan(e, **{name: arr})


BROKEN = {
    'part_boundary_truncated': lambda e: _with_plan(e, part_boundary=e.plan.part_boundary[:-1]),
    'part_boundary_shifted': lambda e: _with_plan(e, part_boundary=e.plan.part_boundary + 1),
    'reorder_table_truncated': lambda e: _with_plan(e, reorder_table=e.plan.reorder_table[:-1]),
    'reorder_not_permutation': lambda e: _with_plan_entry(e, 'reorder_table', 0, e.plan.reorder_table[1]),
    'arrange_table_truncated': lambda e: _with_plan(e, arrange_table=e.plan.arrange_table[:-1]),
    'arrange_table_out_of_range': lambda e: _with_plan_entry(e, 'arrange_table', 0, e.plan.n_er_rows),
    'y_idx_er_out_of_range': lambda e: _with_plan_entry(e, 'y_idx_er', 0, e.padded_dimension),
    'col_ell_outside_window': lambda e: _with_array(e, 'col_ell', 0, e.params.vec_cache_size),
    'col_er_outside_padded': lambda e: _with_array(e, 'col_er', 0, e.padded_dimension),
    'row_width_ell_too_wide': lambda e: _with_array(e, 'row_width_ell', 0, int(e.width_ell[0]) + 1),
    'wrong_padded_dimension': lambda e: _with_plan(e, padded_dimension=e.padded_dimension + 1),
}


@pytest.fixture
def grid_with_er():
    profile = DeviceProfile(num_processors=4, warp_size=4, shm_max=128)
    e = _assembled(tridiagonal(64), profile=profile)
    assert e.plan.n_er_rows > 0 and e.col_er.size > 0
    return e


@pytest.mark.parametrize('name', sorted(BROKEN))
def test_inconsistent_plan_is_rejected(grid_with_er, name):
    e = BROKEN[name](grid_with_er)
    with pytest.raises(NotAssembledError):
        e.validate()
    with pytest.raises(NotAssembledError):
        write_ehyb_container(e, io.BytesIO())
    with pytest.raises(NotAssembledError):
        read_ehyb_container(_unchecked_blob(e))


def test_unchecked_blob_matches_writer(grid_with_er):
    assert _unchecked_blob(grid_with_er) == _blob(grid_with_er)


def test_source_digest_round_trip():
    m = random_sparse(120, 0.05, seed=4)
    e = _assembled(m, tau=4)
    back = read_ehyb_container(_blob(e))
    assert back.source_digest == e.source_digest == coo_digest(m, np.float32)
    assert coo_digest(ehyb_to_coo(back), np.float32) == back.source_digest


def test_source_digest_sees_value_change():
    e = _assembled(laplace2d(8))
    tampered = _with_array(e, 'val_ell', np.flatnonzero(e.val_ell)[0], 7.0)
    assert coo_digest(ehyb_to_coo(tampered)) != tampered.source_digest


def test_container_without_digest_still_loads(grid_with_er):
    e = dataclasses.replace(grid_with_er, source_digest=None)
    back = read_ehyb_container(_blob(e))
    assert back.source_digest is None
    _assert_same(grid_with_er, back)
