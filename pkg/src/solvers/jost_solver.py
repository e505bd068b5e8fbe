"""
Jost 函数求解器
Jost Function Solver

从 x=1 向 0 反向求解 −u″+qu=z²u，得到 Jost 解 ψ(z,x)、x 导数与 z 导数。
常数分段使用精确转移矩阵，非常数分段使用高阶自适应积分器。
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import List, Optional, Protocol, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import solve_ivp

from ..models.potential import Potential, PotentialPiece
from ..utils.config_loader import get_section
from ..utils.exceptions import JostBatchError, JostIntegrationError

log = logging.getLogger(__name__)

ComplexArray = np.ndarray


class JostModel(Protocol):
    """可求值的 Jost 函数（正向求解或 Hadamard 分解）"""

    def evaluate(self, zs) -> ComplexArray:
        ...

    def derivative(self, zs) -> ComplexArray:
        ...


@dataclass(frozen=True)
class JostEvaluation:
    """某一点 (z, x) 的 Jost 解及其导数"""

    z: complex
    x: float
    value: complex
    dx_value: complex
    dz_value: complex


def transfer_entries(w: ComplexArray, taylor_threshold: float = 1e-4) -> Tuple[ComplexArray, ComplexArray, ComplexArray]:
    """
    转移矩阵的偶函数项

    C(w) = cos√w，S(w) = sin√w/√w，S′(w) = dS/dw。三者都是 w 的整函数，
    与 √w 的分支无关。

    Args:
        w: (z² − c)ℓ²
        taylor_threshold: |w| 低于该值时使用 Taylor 展开

    Returns:
        (C, S, S′)
    """
    w = np.asarray(w, dtype=complex)
    k = np.sqrt(w)
    with np.errstate(divide='ignore', invalid='ignore'):
        C = np.cos(k)
        S = np.sin(k) / k
        dS = (C - S) / (2.0 * w)

    small = np.abs(w) < taylor_threshold
    if np.any(small):
        ws = w[small]
        C[small] = 1.0 - ws / 2.0 + ws ** 2 / 24.0 - ws ** 3 / 720.0
        S[small] = 1.0 - ws / 6.0 + ws ** 2 / 120.0 - ws ** 3 / 5040.0

    # S′ 的差商在 |w| 较小时有抵消误差
    mid = np.abs(w) < max(taylor_threshold, 1e-2)
    if np.any(mid):
        wm = w[mid]
        dS[mid] = -1.0 / 6.0 + wm / 60.0 - wm ** 2 / 1680.0 + wm ** 3 / 90720.0
    return C, S, dS


class JostSolver:
    """Jost 解的反向求解器"""

    def __init__(self, config_path: Optional[str] = None):
        """
        初始化求解器

        Args:
            config_path: 系统配置文件路径
        """
        self.config = get_section('jost', config_path)
        self.method = self.config.get('method', 'DOP853')
        self.rtol = float(self.config.get('rtol', 1e-11))
        self.atol = float(self.config.get('atol', 1e-13))
        self.taylor_threshold = float(self.config.get('taylor_threshold', 1e-4))

    # ------------------------------------------------------------------
    # 边界数据与分段传播
    # ------------------------------------------------------------------

    @staticmethod
    def boundary_state(zs: ComplexArray, x: float = 1.0) -> ComplexArray:
        """x ≥ 1 处的状态 [u, u′, u_z, u′_z]"""
        e = np.exp(1j * zs * x)
        return np.array([e, 1j * zs * e, 1j * x * e, 1j * e - zs * x * e])

    def _constant_step(self, state: ComplexArray, zs: ComplexArray, c: complex, ell: float) -> ComplexArray:
        """常数分段上的精确反向转移"""
        u, up, uz, upz = state
        a = zs * zs - c
        C, S, dS = transfer_entries(a * ell * ell, self.taylor_threshold)
        dw = 2.0 * zs * ell * ell
        Cz = -0.5 * S * dw
        Sz = dS * dw

        u_new = C * u - ell * S * up
        up_new = a * ell * S * u + C * up
        uz_new = Cz * u + C * uz - ell * Sz * up - ell * S * upz
        upz_new = (2.0 * zs * ell * S + a * ell * Sz) * u + a * ell * S * uz + Cz * up + C * upz
        return np.array([u_new, up_new, uz_new, upz_new])

    def _ode_step(self, state: ComplexArray, zs: ComplexArray, piece: PotentialPiece,
                  x_from: float, x_to: float) -> ComplexArray:
        """非常数分段上的自适应积分（含变分方程）"""
        n = zs.size
        z2 = zs * zs

        def rhs(x, y):
            u, up, uz, upz = y[:n], y[n:2 * n], y[2 * n:3 * n], y[3 * n:]
            qx = piece.local(np.array(x - piece.x_lo))
            g = qx - z2
            return np.concatenate([up, g * u, upz, g * uz - 2.0 * zs * u])

        y0 = state.reshape(-1)
        scale = np.max(np.abs(state), axis=0)
        atol = self.atol * np.tile(np.maximum(scale, 1e-300), 4)
        sol = solve_ivp(rhs, (x_from, x_to), y0, method=self.method, rtol=self.rtol, atol=atol)
        if sol.status != 0 or not sol.success:
            location = float(sol.t[-1]) if sol.t.size else x_from
            raise JostIntegrationError(f"ODE 积分失败: {sol.message}", location)
        y = sol.y[:, -1]
        if not np.all(np.isfinite(y)):
            raise JostIntegrationError("ODE 积分结果非有限", x_to)
        return y.reshape(4, n)

    def propagate(self, q: Potential, zs, x: float = 0.0) -> ComplexArray:
        """
        将边界数据从 x=1 反向传播到 x

        Args:
            q: 势函数
            zs: 谱参数（标量或数组）
            x: 目标位置 (x ≥ 0)

        Returns:
            形状 (4, N) 的状态数组 [u, u′, u_z, u′_z]
        """
        zs = np.atleast_1d(np.asarray(zs, dtype=complex)).ravel()
        if not np.all(np.isfinite(zs)):
            raise ValueError("谱参数 z 必须为有限复数")
        if x < 0:
            raise ValueError(f"位置 x={x} 必须非负")
        if x >= 1.0:
            return self.boundary_state(zs, x)

        state = self.boundary_state(zs, 1.0)
        for a, b, piece in reversed(q.segments()):
            if b <= x:
                break
            lo = max(a, x)
            ell = b - lo
            if piece is None or piece.is_zero:
                state = self._constant_step(state, zs, 0.0, ell)
            elif piece.is_constant:
                state = self._constant_step(state, zs, piece.value, ell)
            else:
                state = self._ode_step(state, zs, piece, b, lo)
        return state

    # ------------------------------------------------------------------
    # 对外接口
    # ------------------------------------------------------------------

    def evaluate(self, q: Potential, z: complex, x: float = 0.0) -> JostEvaluation:
        """单点求值 ψ(z,x)、ψ′(z,x)、∂_zψ(z,x)"""
        z = complex(z)
        u, up, uz, _ = self.propagate(q, z, x)[:, 0]
        return JostEvaluation(z=z, x=float(x), value=complex(u), dx_value=complex(up), dz_value=complex(uz))

    def jost_function(self, q: Potential, z: complex) -> complex:
        return complex(self.propagate(q, complex(z), 0.0)[0, 0])

    def batch(self, q: Potential, zs: Sequence[complex]) -> List[complex]:
        """
        逐点求值，结果与逐次调用 jost_function 完全一致

        Args:
            q: 势函数
            zs: 谱参数列表

        Returns:
            ψ(z) 列表
        """
        out = []
        for index, z in enumerate(zs):
            try:
                out.append(self.jost_function(q, z))
            except Exception as e:
                raise JostBatchError(index, e) from e
        return out

    def profile(self, q: Potential, z: complex, xs: Sequence[float]) -> ComplexArray:
        """沿 x 采样 ψ(z,x)"""
        return np.array([self.evaluate(q, z, float(x)).value for x in xs])


class ForwardJost:
    """由势函数正向求解得到的 Jost 模型（数组化求值）"""

    def __init__(self, potential: Potential, solver: Optional[JostSolver] = None):
        self.potential = potential
        self.solver = solver or default_solver()

    def evaluate(self, zs) -> ComplexArray:
        shape = np.shape(zs)
        values = self.solver.propagate(self.potential, zs, 0.0)[0]
        return values.reshape(shape) if shape else complex(values[0])

    def derivative(self, zs) -> ComplexArray:
        shape = np.shape(zs)
        values = self.solver.propagate(self.potential, zs, 0.0)[2]
        return values.reshape(shape) if shape else complex(values[0])

    def value_and_derivative(self, zs) -> Tuple[ComplexArray, ComplexArray]:
        state = self.solver.propagate(self.potential, zs, 0.0)
        return state[0], state[2]

    def __call__(self, zs):
        return self.evaluate(zs)


@lru_cache(maxsize=1)
def default_solver() -> JostSolver:
    return JostSolver()


def jost_eval(q: Potential, z: complex, x: float) -> JostEvaluation:
    return default_solver().evaluate(q, z, x)


def jost_function(q: Potential, z: complex) -> complex:
    return default_solver().jost_function(q, z)


def batch_jost(q: Potential, zs: Sequence[complex]) -> List[complex]:
    return default_solver().batch(q, zs)


def jost_solution_profile(q: Potential, z: complex, xs: Sequence[float]) -> ComplexArray:
    return default_solver().profile(q, z, xs)
