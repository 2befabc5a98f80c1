"""图划分：区域生长 + 边界细化 + 容量再平衡"""
import heapq
import logging
import os
from collections import deque
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
import scipy.sparse as sp

from .errors import (
    DimensionMismatchError,
    InfeasibleCapacityError,
    NotSquareError,
    PartitionError,
    PartitionFileError,
)
from .matrix_io import CooMatrix

log = logging.getLogger(__name__)


@dataclass
class AdjacencyGraph:
    """无向图（CSR 邻接表，无自环，邻居有序）"""
    n_vertices: int
    indptr: np.ndarray
    indices: np.ndarray

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    @property
    def n_edges(self) -> int:
        return int(self.indices.size // 2)


@dataclass
class PartitionMap:
    """顶点 → 分区编号"""
    n_parts: int
    assignment: np.ndarray

    def __post_init__(self):
        self.assignment = np.asarray(self.assignment, dtype=np.int64)
        if self.n_parts < 1:
            raise PartitionError(f"n_parts must be >= 1, got {self.n_parts}")
        if self.assignment.size and (self.assignment.min() < 0 or self.assignment.max() >= self.n_parts):
            raise PartitionError(f"partition ids must lie in [0, {self.n_parts})")

    @property
    def n_vertices(self) -> int:
        return int(self.assignment.size)

    @property
    def part_sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.n_parts)

    def members(self, part: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == part)


def build_graph(m: CooMatrix) -> AdjacencyGraph:
    """矩阵 → 无向图：(u,v) 或 (v,u) 存在即连边，对角元忽略"""
    if not m.is_square:
        raise NotSquareError(f"matrix must be square, got {m.n_rows}x{m.n_cols}")
    n = m.n_rows
    off = m.rows != m.cols
    pattern = sp.coo_matrix(
        (np.ones(int(off.sum()), dtype=np.int8), (m.rows[off], m.cols[off])), shape=(n, n))
    sym = (pattern + pattern.T).tocsr()
    sym.sum_duplicates()
    sym.sort_indices()
    return AdjacencyGraph(n, sym.indptr.astype(np.int64), sym.indices.astype(np.int64))


def _check_capacity(n_vertices: int, n_parts: int, capacity: int):
    if n_parts < 1:
        raise PartitionError(f"n_parts must be >= 1, got {n_parts}")
    if capacity < 1 or n_parts * capacity < n_vertices:
        raise InfeasibleCapacityError(
            f"{n_parts} parts x capacity {capacity} cannot hold {n_vertices} vertices")


def partition_graph(g: AdjacencyGraph, n_parts: int, capacity: int, seed: int = 0) -> PartitionMap:
    """贪心 BFS 区域生长 → 孤立点轮转分配 → 再平衡 → 一轮边界细化

    同一图、同一 seed 结果完全一致。
    """
    n = g.n_vertices
    _check_capacity(n, n_parts, capacity)
    assignment = np.full(n, -1, dtype=np.int64)
    if n_parts == 1:
        assignment[:] = 0
        return PartitionMap(1, assignment)

    degrees = g.degrees()
    # 度相同的种子候选按 seed 决定的随机秩打破平局
    rank = np.random.default_rng(seed).permutation(n)
    candidates = sorted((v for v in range(n) if degrees[v] > 0),
                        key=lambda v: (degrees[v], rank[v]))
    cursor = 0
    remaining = len(candidates)
    sizes = np.zeros(n_parts, dtype=np.int64)

    for part in range(n_parts):
        if remaining == 0:
            break
        target = min(capacity, -(-remaining // (n_parts - part)))
        while sizes[part] < target:
            while cursor < len(candidates) and assignment[candidates[cursor]] >= 0:
                cursor += 1
            if cursor == len(candidates):
                break
            start = candidates[cursor]
            assignment[start] = part
            sizes[part] += 1
            queue = deque([start])
            while queue and sizes[part] < target:
                u = queue.popleft()
                for v in g.neighbors(u):
                    if assignment[v] < 0:
                        assignment[v] = part
                        sizes[part] += 1
                        queue.append(v)
                        if sizes[part] >= target:
                            break
        remaining -= int(sizes[part])
        log.debug("region %d grown to %d vertices", part, sizes[part])

    # 孤立点轮转放入未满的分区
    isolated = np.flatnonzero(assignment < 0)
    p = 0
    for v in isolated:
        while sizes[p] >= capacity:
            p = (p + 1) % n_parts
        assignment[v] = p
        sizes[p] += 1
        p = (p + 1) % n_parts

    pmap = PartitionMap(n_parts, assignment)
    pmap = rebalance_partition(g, pmap, capacity)
    return _refine_boundary(g, pmap, capacity)


def _neighbor_part_counts(g: AdjacencyGraph, assignment: np.ndarray, v: int) -> dict:
    counts: dict = {}
    for u in g.neighbors(v):
        q = int(assignment[u])
        counts[q] = counts.get(q, 0) + 1
    return counts


def _external_degrees(g: AdjacencyGraph, assignment: np.ndarray) -> np.ndarray:
    """每个顶点连向其他分区的边数"""
    src = np.repeat(np.arange(g.n_vertices), g.degrees())
    crossing = assignment[src] != assignment[g.indices]
    return np.bincount(src[crossing], minlength=g.n_vertices).astype(np.int64)


def _move_vertex(g: AdjacencyGraph, assignment: np.ndarray, ext: np.ndarray, v: int, dest: int) -> np.ndarray:
    """迁移 v 并就地更新它和邻居的外连数；返回邻居"""
    nbrs = g.neighbors(v)
    owners = assignment[nbrs]
    ext[nbrs[owners == assignment[v]]] += 1
    ext[nbrs[owners == dest]] -= 1
    ext[v] = int(np.count_nonzero(owners != dest))
    assignment[v] = dest
    return nbrs


def rebalance_partition(g: AdjacencyGraph, p: PartitionMap, capacity: int) -> PartitionMap:
    """把超容分区中外连最多的边界点迁到最空的相邻未满分区

    外连数开始时整体算一次，之后用堆 (-外连数, 顶点) 取点，每次迁移只更新被迁点的邻居。
    """
    if g.n_vertices != p.n_vertices:
        raise DimensionMismatchError(
            f"graph has {g.n_vertices} vertices, partition covers {p.n_vertices}")
    _check_capacity(g.n_vertices, p.n_parts, capacity)
    assignment = p.assignment.copy()
    sizes = np.bincount(assignment, minlength=p.n_parts)
    ext = _external_degrees(g, assignment)
    others = np.arange(p.n_parts)
    moves = 0
    for part in np.flatnonzero(sizes > capacity):
        part = int(part)
        members = np.flatnonzero(assignment == part)
        cursor = members.size
        heap = [(-int(ext[v]), int(v)) for v in members if ext[v] > 0]
        heapq.heapify(heap)
        while sizes[part] > capacity:
            v = dest = -1
            while heap:
                neg_cut, u = heapq.heappop(heap)
                if assignment[u] != part or -neg_cut != ext[u]:
                    continue
                open_parts = {int(q) for q in assignment[g.neighbors(u)] if q != part and sizes[q] < capacity}
                if open_parts:
                    v, dest = u, min(open_parts, key=lambda q: (sizes[q], q))
                    break
            if v < 0:
                # 没有相邻未满分区时退回全局最空分区，迁出编号最大的剩余顶点
                cursor -= 1
                while assignment[members[cursor]] != part:
                    cursor -= 1
                v = int(members[cursor])
                dest = int(np.argmin(np.where(others == part, np.iinfo(np.int64).max, sizes)))
            for u in _move_vertex(g, assignment, ext, v, dest):
                if assignment[u] == part:
                    heapq.heappush(heap, (-int(ext[u]), int(u)))
            sizes[part] -= 1
            sizes[dest] += 1
            moves += 1
    if moves:
        log.debug("rebalance moved %d vertices", moves)
    return PartitionMap(p.n_parts, assignment)


def _refine_boundary(g: AdjacencyGraph, p: PartitionMap, capacity: int) -> PartitionMap:
    """单轮细化：只做严格减少割边的移动"""
    assignment = p.assignment.copy()
    sizes = np.bincount(assignment, minlength=p.n_parts)
    gained = 0
    for v in range(g.n_vertices):
        own = int(assignment[v])
        counts = _neighbor_part_counts(g, assignment, v)
        if len(counts) <= 1 and own in counts:
            continue
        here = counts.get(own, 0)
        best_q, best_gain = -1, 0
        for q in sorted(counts):
            gain = counts[q] - here
            if q != own and sizes[q] < capacity and gain > best_gain:
                best_q, best_gain = q, gain
        if best_q >= 0:
            assignment[v] = best_q
            sizes[own] -= 1
            sizes[best_q] += 1
            gained += best_gain
    log.debug("boundary refinement removed %d cut edges", gained)
    return PartitionMap(p.n_parts, assignment)


def random_partition(n_vertices: int, n_parts: int, capacity: int, seed: int = 0) -> PartitionMap:
    """均衡随机划分（质量对比基线）"""
    _check_capacity(n_vertices, n_parts, capacity)
    perm = np.random.default_rng(seed).permutation(n_vertices)
    assignment = np.empty(n_vertices, dtype=np.int64)
    assignment[perm] = np.arange(n_vertices) % n_parts
    return PartitionMap(n_parts, assignment)


def contiguous_partition(n_vertices: int, n_parts: int, capacity: int) -> PartitionMap:
    """按下标切块"""
    _check_capacity(n_vertices, n_parts, capacity)
    block = -(-n_vertices // n_parts) if n_vertices else 1
    return PartitionMap(n_parts, np.arange(n_vertices) // max(block, 1))


def edge_cut(g: AdjacencyGraph, p: PartitionMap) -> int:
    src = np.repeat(np.arange(g.n_vertices), g.degrees())
    crossing = p.assignment[src] != p.assignment[g.indices]
    return int(crossing.sum() // 2)


def cut_metrics(m: CooMatrix, p: PartitionMap) -> Tuple[int, int, float]:
    """(inner_entries, extra_entries, inner_fraction)"""
    if m.n_rows != p.n_vertices or m.n_cols != p.n_vertices:
        raise DimensionMismatchError(
            f"matrix {m.n_rows}x{m.n_cols} vs partition of {p.n_vertices} vertices")
    inner = int((p.assignment[m.rows] == p.assignment[m.cols]).sum())
    extra = m.nnz - inner
    return inner, extra, (inner / m.nnz if m.nnz else 1.0)


def load_partition_file(source, n_vertices: int, n_parts: Optional[int] = None) -> PartitionMap:
    """读取 METIS 风格划分文件（每行一个 0 基分区号）"""
    if isinstance(source, (str, os.PathLike)):
        with open(source, 'r', encoding='utf-8') as f:
            text = f.read()
    else:
        text = source.read()
    if isinstance(text, bytes):
        text = text.decode('utf-8')
    lines: List[str] = text.splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    if len(lines) != n_vertices:
        raise PartitionFileError(f"expected {n_vertices} lines, found {len(lines)}")
    try:
        ids = np.array([int(line.strip()) for line in lines], dtype=np.int64)
    except ValueError as e:
        raise PartitionFileError(f"non-integer partition id: {e}")
    if ids.size and ids.min() < 0:
        raise PartitionFileError("negative partition id")
    if n_parts is None:
        n_parts = int(ids.max()) + 1 if ids.size else 1
    if ids.size and ids.max() >= n_parts:
        raise PartitionFileError(f"partition id {int(ids.max())} >= n_parts {n_parts}")
    return PartitionMap(n_parts, ids)


def save_partition_file(p: PartitionMap, sink) -> None:
    text = ''.join(f'{int(q)}\n' for q in p.assignment)
    if isinstance(sink, (str, os.PathLike)):
        with open(sink, 'w', encoding='utf-8') as f:
            f.write(text)
    else:
        sink.write(text)
