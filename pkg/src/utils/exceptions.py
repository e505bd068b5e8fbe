"""
异常定义
Exception Hierarchy

resolab 各模块共用的异常类型。命令行入口据此映射退出码：
- ConfigError    → 2（配置/输入错误）
- NumericalError → 3（数值计算失败）
"""


class ResolabError(Exception):
    """resolab 异常基类"""


class ConfigError(ResolabError):
    """配置或输入数据错误"""


class NumericalError(ResolabError):
    """数值计算失败"""


# ---------------------------------------------------------------------------
# 势函数解析
# ---------------------------------------------------------------------------

class PotentialParseError(ConfigError, ValueError):
    """势函数描述解析错误"""

    def __init__(self, message: str, line_no: int = 0):
        self.line_no = line_no
        prefix = f"第 {line_no} 行: " if line_no else ""
        super().__init__(prefix + message)


class MalformedLineError(PotentialParseError):
    """指令格式错误"""


class EmptyPieceError(PotentialParseError):
    """区间端点 x_lo >= x_hi"""


class OverlappingPiecesError(PotentialParseError):
    """分段区间重叠"""


class SupportError(PotentialParseError):
    """支撑超出 [0,1]"""


class InvalidExponentError(ValueError):
    """Lp 范数指数超出 (1,2]"""


# ---------------------------------------------------------------------------
# Jost 函数
# ---------------------------------------------------------------------------

class JostIntegrationError(NumericalError):
    """非常数分段上的 ODE 积分失败"""

    def __init__(self, message: str, location: float):
        self.location = location
        super().__init__(f"{message} (x = {location:.6g})")


class JostBatchError(NumericalError):
    """批量求值中某个元素失败"""

    def __init__(self, index: int, cause: Exception):
        self.index = index
        self.cause = cause
        super().__init__(f"批量求值第 {index} 个点失败: {cause}")


# ---------------------------------------------------------------------------
# 零点计算
# ---------------------------------------------------------------------------

class ZeroFileError(ConfigError):
    """零点文件缺失或格式错误"""


class ContourError(NumericalError):
    """积分围道过于靠近零点"""


class WindingError(NumericalError):
    """辐角原理得到非整数绕数"""


class SubdivisionDepthError(NumericalError):
    """四分细分深度超限"""


class ZeroCountError(NumericalError):
    """定位到的零点重数和与圆周计数不一致"""

    def __init__(self, located: int, expected: int):
        self.located = located
        self.expected = expected
        super().__init__(f"定位到的零点重数和 {located} 与圆周计数 {expected} 不一致")


# ---------------------------------------------------------------------------
# 变换算子核
# ---------------------------------------------------------------------------

class KernelConvergenceError(NumericalError):
    """核级数在截断项数内未收敛"""


class MeshMismatchError(NumericalError, ValueError):
    """两个核网格步长不一致"""


# ---------------------------------------------------------------------------
# Hadamard 分解
# ---------------------------------------------------------------------------

class CalibrationError(NumericalError):
    """指数因子标定失败"""


class PairingError(NumericalError, ValueError):
    """零点集合无法配对"""


class PoleError(NumericalError, ValueError):
    """求值点与极点重合"""


# ---------------------------------------------------------------------------
# 界估计
# ---------------------------------------------------------------------------

class BoundDomainError(ValueError):
    """界公式的前提条件不满足"""
