"""EHYB 异常定义"""
from typing import Optional


class EhybError(Exception):
    """所有 EHYB 错误的基类（CLI 捕获后映射为退出码 2）"""


class ConfigError(EhybError):
    """配置/设备参数非法"""


class MatrixParseError(EhybError):
    """Matrix Market 文本格式错误"""

    def __init__(self, message: str, line_no: Optional[int] = None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


class MatrixValidationError(EhybError):
    """坐标越界等结构性错误"""


class UnsupportedFormatError(EhybError):
    """complex / array / hermitian 等不支持的变体"""


class DimensionMismatchError(EhybError):
    """矩阵、划分、向量维度不一致"""


class NotSquareError(DimensionMismatchError):
    """EHYB 流水线只接受方阵"""


class ContainerError(EhybError):
    """.ehyb 容器读写错误"""


class ContainerMagicError(ContainerError):
    pass


class ContainerVersionError(ContainerError):
    pass


class ContainerTruncatedError(ContainerError):
    pass


class ContainerChecksumError(ContainerError):
    pass


class PartitionError(EhybError):
    """图划分错误"""


class InfeasibleCapacityError(PartitionError):
    """n_parts × capacity 放不下全部顶点"""


class PartitionFileError(PartitionError):
    """划分交换文件格式错误"""


class InfeasibleParamsError(EhybError):
    """共享内存容量或 16 位索引约束无法满足"""


class VectorLengthError(DimensionMismatchError):
    """输入向量长度不匹配"""


class NotAssembledError(EhybError):
    """EhybMatrix 数组不完整或互相矛盾"""
