"""EHYB 稀疏格式与 SpMV 核心模块"""
from .errors import (
    EhybError,
    ConfigError,
    MatrixParseError,
    MatrixValidationError,
    UnsupportedFormatError,
    DimensionMismatchError,
    NotSquareError,
    ContainerError,
    ContainerMagicError,
    ContainerVersionError,
    ContainerTruncatedError,
    ContainerChecksumError,
    PartitionError,
    InfeasibleCapacityError,
    PartitionFileError,
    InfeasibleParamsError,
    VectorLengthError,
    NotAssembledError,
)
from .matrix_io import (
    CooMatrix,
    CsrMatrix,
    parse_matrix_market,
    read_matrix,
    write_matrix_market,
    coo_to_csr,
    csr_to_coo,
)
from .partitioner import (
    AdjacencyGraph,
    PartitionMap,
    build_graph,
    partition_graph,
    rebalance_partition,
    random_partition,
    contiguous_partition,
    edge_cut,
    cut_metrics,
    load_partition_file,
    save_partition_file,
)
from .format import (
    DeviceProfile,
    EhybParams,
    EhybMatrix,
    RowClassification,
    ReorderPlan,
    compute_params,
    classify_rows,
    build_reorder_plan,
    assemble_ehyb,
    build_ehyb,
    coo_digest,
    ehyb_to_coo,
    footprint_stats,
    width_histogram,
    padding_overhead,
    permute_vector,
    unpermute_vector,
)
from .container import write_ehyb_container, read_ehyb_container
from .engine import (
    ExecutionConfig,
    ExecStats,
    SliceCounter,
    spmv_csr,
    spmv_ehyb,
    spmv_ehyb_user,
    traffic_breakdown,
    traffic_model,
)
from .pipeline import ConversionResult, convert_matrix, conversion_summary
from .bench import BenchReport, lcg_vector, median_time, verify, run_bench, write_reports, read_reports
from .database import Database

__all__ = [
    'EhybError', 'ConfigError', 'MatrixParseError', 'MatrixValidationError', 'UnsupportedFormatError',
    'DimensionMismatchError', 'NotSquareError', 'ContainerError', 'ContainerMagicError',
    'ContainerVersionError', 'ContainerTruncatedError', 'ContainerChecksumError', 'PartitionError',
    'InfeasibleCapacityError', 'PartitionFileError', 'InfeasibleParamsError', 'VectorLengthError',
    'NotAssembledError',
    'CooMatrix', 'CsrMatrix', 'parse_matrix_market', 'read_matrix', 'write_matrix_market',
    'coo_to_csr', 'csr_to_coo',
    'AdjacencyGraph', 'PartitionMap', 'build_graph', 'partition_graph', 'rebalance_partition',
    'random_partition', 'contiguous_partition', 'edge_cut', 'cut_metrics', 'load_partition_file',
    'save_partition_file',
    'DeviceProfile', 'EhybParams', 'EhybMatrix', 'RowClassification', 'ReorderPlan', 'compute_params',
    'classify_rows', 'build_reorder_plan', 'assemble_ehyb', 'build_ehyb', 'coo_digest', 'ehyb_to_coo',
    'footprint_stats', 'width_histogram', 'padding_overhead', 'permute_vector', 'unpermute_vector',
    'write_ehyb_container', 'read_ehyb_container',
    'ExecutionConfig', 'ExecStats', 'SliceCounter', 'spmv_csr', 'spmv_ehyb', 'spmv_ehyb_user',
    'traffic_breakdown', 'traffic_model',
    'ConversionResult', 'convert_matrix', 'conversion_summary',
    'BenchReport', 'lcg_vector', 'median_time', 'verify', 'run_bench', 'write_reports', 'read_reports',
    'Database',
]
