"""
Hadamard 分解
Hadamard Factorization

由有限零点集合重建 Jost 函数：截断 Hadamard 乘积 z^{n0}·e^{g(z)}·∏E(z/z_n)，
多项式指数 g 在正虚轴上插值标定；另提供零点扰动比 W(z) 与乘积尾部界。
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Tuple, Union

import numpy as np
from numpy.polynomial import polynomial as P

from ..models.zero_set import ZeroSet, match_zeros
from ..utils.exceptions import BoundDomainError, CalibrationError, PairingError, PoleError

log = logging.getLogger(__name__)

# 超过该因子数时改用对数累加
DIRECT_PRODUCT_LIMIT = 64

# 小 |w| 时使用级数
SMALL_W = 1e-8
SERIES_W = 1e-3

# g 的可选次数；1 为两点线性标定
CALIBRATION_DEGREES = (1, 2, 3, 4)
DEFAULT_CALIBRATION_DEGREE = 3


def log_elementary_factor(w):
    """log E(w) = log(1 − w) + w（主值），小 |w| 时用级数"""
    w = np.asarray(w, dtype=complex)
    with np.errstate(divide='ignore', invalid='ignore'):
        out = np.asarray(np.log(1.0 - w) + w)
    small = np.abs(w) < SERIES_W
    if np.any(small):
        ws = w[small]
        series = np.zeros_like(ws)
        power = ws * ws
        for k in range(2, 9):
            series -= power / k
            power = power * ws
        out[small] = series
    return out if out.ndim else complex(out)


def elementary_factor(w):
    """
    初等因子 E(w) = (1 − w)·e^w

    Args:
        w: 标量或数组

    Returns:
        E(w)；|w| < 1e-8 时按 exp(−w²/2 − w³/3) 计算
    """
    w = np.asarray(w, dtype=complex)
    out = np.asarray((1.0 - w) * np.exp(w))
    small = np.abs(w) < SMALL_W
    if np.any(small):
        ws = w[small]
        out[small] = np.exp(-ws * ws / 2.0 - ws ** 3 / 3.0)
    return out if out.ndim else complex(out)


def elementary_factor_minus_1(w):
    """E(w) − 1，避免小 |w| 时的抵消误差"""
    w = np.asarray(w, dtype=complex)
    with np.errstate(divide='ignore', invalid='ignore'):
        out = np.asarray(np.expm1(np.asarray(log_elementary_factor(w), dtype=complex)))
    exact_zero = w == 1.0
    out[exact_zero] = -1.0
    return out if out.ndim else complex(out)


def _expanded(zs: ZeroSet) -> np.ndarray:
    """按重数展开的零点数组"""
    if not zs.zeros:
        return np.zeros(0, dtype=complex)
    return np.repeat(zs.values, zs.multiplicities)


def truncated_product(zs: ZeroSet, z) -> Union[complex, np.ndarray]:
    """
    截断乘积 ∏_n E(z/z_n)^{m_n}

    Args:
        zs: 零点集合（不得包含原点）
        z: 求值点（标量或数组）

    Returns:
        乘积值
    """
    roots = _expanded(zs)
    if np.any(roots == 0):
        raise ValueError("零点集合包含原点，应通过 n0 表示")
    za = np.asarray(z, dtype=complex)
    if roots.size == 0:
        out = np.ones(za.shape, dtype=complex)
        return out if out.ndim else complex(out)
    w = za[..., None] / roots
    if roots.size <= DIRECT_PRODUCT_LIMIT:
        out = np.prod(np.asarray(elementary_factor(w)), axis=-1)
    else:
        with np.errstate(divide='ignore'):
            out = np.exp(np.sum(np.asarray(log_elementary_factor(w)), axis=-1))
    return out if out.ndim else complex(out)


def annulus_product(zs: ZeroSet, r_inner: float, z) -> Union[complex, np.ndarray]:
    """只含 |z_n| ≥ r_inner 的零点的乘积，用于比较两种截断半径"""
    outer = replace(zs, zeros=tuple(zr for zr in zs.zeros if abs(zr.z) >= r_inner))
    return truncated_product(outer, z)


@dataclass(frozen=True)
class FactorizedJost:
    """
    由零点重建的 Jost 模型

    ψ̃(z) = z^{n0}·exp(g(z))·∏E(z/z_n)，g(z) = Σ_k a_k z^k。
    g_coeffs 按升幂排列；一次 g 即两点标定的 a1·z + a0，
    更高次项吸收圆盘外零点乘积的低阶 Taylor 项。
    """

    zeros: ZeroSet
    n0: int
    g_coeffs: Tuple[complex, ...]
    window: float
    calibration: Tuple[float, ...] = field(default=())

    @property
    def a0(self) -> complex:
        return self.g_coeffs[0] if self.g_coeffs else 0j

    @property
    def a1(self) -> complex:
        return self.g_coeffs[1] if len(self.g_coeffs) > 1 else 0j

    @property
    def degree(self) -> int:
        return max(len(self.g_coeffs) - 1, 0)

    def g(self, z):
        z = np.asarray(z, dtype=complex)
        if not self.g_coeffs:
            return np.zeros(z.shape, dtype=complex)
        return P.polyval(z, np.asarray(self.g_coeffs, dtype=complex))

    def _base(self, z: np.ndarray) -> np.ndarray:
        """z^{n0}·∏E(z/z_n)"""
        out = np.asarray(truncated_product(self.zeros, z), dtype=complex)
        if self.n0:
            out = out * z ** self.n0
        return out

    def evaluate(self, zs):
        z = np.asarray(zs, dtype=complex)
        out = np.exp(self.g(z)) * self._base(z)
        return out if out.ndim else complex(out)

    def log_derivative(self, zs):
        """ψ̃′/ψ̃ = n0/z + g′(z) + Σ m(1/(z − z_n) + 1/z_n)"""
        z = np.asarray(zs, dtype=complex)
        roots = _expanded(self.zeros)
        dg = P.polyder(np.asarray(self.g_coeffs, dtype=complex)) if self.degree else np.zeros(1, dtype=complex)
        with np.errstate(divide='ignore', invalid='ignore'):
            out = np.asarray(P.polyval(z, dg), dtype=complex) * np.ones(z.shape, dtype=complex)
            if self.n0:
                out = out + self.n0 / z
            if roots.size:
                out = out + np.sum(1.0 / (z[..., None] - roots) + 1.0 / roots, axis=-1)
        return out if out.ndim else complex(out)

    def derivative(self, zs):
        z = np.atleast_1d(np.asarray(zs, dtype=complex))
        value = np.atleast_1d(np.asarray(self.evaluate(z), dtype=complex))
        out = value * np.atleast_1d(np.asarray(self.log_derivative(z), dtype=complex))

        # 恰好落在单零点上时，去掉该因子后乘以 dE/dz
        hits = ~np.isfinite(out)
        if np.any(hits):
            roots = _expanded(self.zeros)
            for i in np.nonzero(hits)[0]:
                k = int(np.argmin(np.abs(roots - z[i]))) if roots.size else -1
                if k < 0 or roots[k] != z[i] or np.sum(roots == roots[k]) > 1:
                    out[i] = 0.0
                    continue
                others = ZeroSet.from_values(np.delete(roots, k), self.zeros.R)
                reduced = FactorizedJost(others, self.n0, self.g_coeffs, self.window)
                out[i] = reduced.evaluate(z[i]) * (-math.e / roots[k])
        return out.reshape(np.shape(zs)) if np.ndim(zs) else complex(out[0])

    def value_and_derivative(self, zs):
        return self.evaluate(zs), self.derivative(zs)

    def __call__(self, zs):
        return self.evaluate(zs)


def calibration_heights(R: float, degree: int = 1) -> Tuple[float, ...]:
    """
    标定高度：在 [3R^{1/3}, 6R^{1/3}] 上等距取 degree + 1 个点

    degree = 1 时即 y1 = 3R^{1/3}, y2 = 6R^{1/3}。
    """
    if degree not in CALIBRATION_DEGREES:
        raise ValueError(f"标定次数须在 {CALIBRATION_DEGREES} 内，得到 {degree}")
    base = R ** (1.0 / 3.0)
    return tuple(float(y) for y in np.linspace(3.0 * base, 6.0 * base, degree + 1))


def _target_function(reference) -> Callable[[np.ndarray], np.ndarray]:
    if reference is None:
        return lambda z: np.ones(np.shape(z), dtype=complex)
    evaluate = getattr(reference, 'evaluate', reference)
    return lambda z: np.asarray(evaluate(np.asarray(z, dtype=complex)), dtype=complex)


def normalize(zs: ZeroSet, reference=None, degree: int = DEFAULT_CALIBRATION_DEGREE,
              samples: int = 400) -> FactorizedJost:
    """
    标定指数因子 g(z) = Σ_{k≤degree} a_k z^k

    在标定高度 y_j 处令 log target(iy_j) − log((iy_j)^{n0}Π(iy_j)) = g(iy_j)，
    对数沿虚轴从 y = 10·max(1, R^{1/3}) 向下连续延拓。degree = 1 为两点线性系统；
    degree = 3 时 g 同时吸收圆盘外零点贡献的 −(z²/2)Σz_n^{−2} − (z³/3)Σz_n^{−3}。

    Args:
        zs: 零点集合
        reference: 提供标定目标的 Jost 模型；None 表示目标 ≡ 1
        degree: g 的次数（1 至 4）
        samples: 延拓采样点数

    Returns:
        FactorizedJost
    """
    R = float(zs.R)
    heights = np.asarray(calibration_heights(R, degree))
    if np.any(np.diff(heights) <= 0):
        raise CalibrationError(f"标定点重合: {heights}")

    n0 = zs.multiplicity_at_origin()
    interior = zs.without_origin()
    window = R ** (1.0 / 3.0)
    partial = FactorizedJost(interior, n0, (), window)

    y_top = 10.0 * max(1.0, R ** (1.0 / 3.0))
    ys = np.linspace(max(y_top, heights[-1]), heights[0], samples)
    ys = np.unique(np.concatenate([ys, heights]))[::-1]
    z_axis = 1j * ys
    targets = _target_function(reference)(z_axis)
    base = np.asarray(partial.evaluate(z_axis), dtype=complex)
    if np.any(targets == 0) or np.any(base == 0) or not np.all(np.isfinite(base)):
        raise CalibrationError("标定点处函数值为零或非有限")
    ratio = targets / base
    phase = np.unwrap(np.angle(ratio))
    logs = np.log(np.abs(ratio)) + 1j * phase
    d = np.array([logs[np.argmin(np.abs(ys - y))] for y in heights])

    # 以 w = z/(i·y_max) 缩放后解 Vandermonde 系统
    scale = heights[-1]
    V = np.vander(heights / scale, degree + 1, increasing=True).astype(complex)
    try:
        b = np.linalg.solve(V, d)
    except np.linalg.LinAlgError as e:
        raise CalibrationError(f"标定系统奇异: {e}")
    coeffs = tuple(complex(b[k] / (1j * scale) ** k) for k in range(degree + 1))
    model = FactorizedJost(interior, n0, coeffs, window, tuple(float(y) for y in heights))

    check = np.abs(np.asarray(model.evaluate(1j * heights)) - _target_function(reference)(1j * heights))
    if np.max(check) > 1e-8 * max(1.0, float(np.max(np.abs(targets)))):
        log.warning("标定残差 %.3e 超过 1e-8", float(np.max(check)))
    return model


# ---------------------------------------------------------------------------
# 零点扰动比
# ---------------------------------------------------------------------------

def log_ratio_W(zs: ZeroSet, zs_tilde: ZeroSet, z):
    """
    log W(z) = Σ log((z − z_n)/(z − z̃_n))，按最小权匹配配对后逐项取主值

    Args:
        zs: 原零点集合
        zs_tilde: 扰动零点集合
        z: 求值点

    Returns:
        log W(z)
    """
    a = ZeroSet.from_values(_expanded(zs), zs.R)
    b = ZeroSet.from_values(_expanded(zs_tilde), zs_tilde.R)
    if len(a) != len(b):
        raise PairingError(f"零点集合无法配对: {len(a)} vs {len(b)}")
    left, right = match_zeros(a, b)
    za = np.asarray(z, dtype=complex)
    if left.size == 0:
        out = np.zeros(za.shape, dtype=complex)
        return out if out.ndim else complex(out)
    denom = za[..., None] - right
    if np.any(denom == 0):
        raise PoleError("求值点与扰动零点重合")
    num = za[..., None] - left
    out = np.sum(np.log(num / denom), axis=-1)
    return out if out.ndim else complex(out)


def ratio_W(zs: ZeroSet, zs_tilde: ZeroSet, z):
    """W(z) = ∏ (z − z_n)/(z − z̃_n)"""
    out = np.exp(np.asarray(log_ratio_W(zs, zs_tilde, z)))
    return out if out.ndim else complex(out)


def tail_bound_pi(R: float, z: complex, kappa: Optional[float] = None) -> float:
    """
    圆盘外零点乘积的尾部界 72|z|²/R·exp(72|z|²/R)

    Args:
        R: 圆盘半径
        z: 求值点（|z| ≤ R/2）
        kappa: Jost 函数界常数（提供时检查 R ≥ 18κ）

    Returns:
        界值
    """
    if R <= 0:
        raise BoundDomainError(f"R={R} 必须为正")
    if abs(z) > R / 2:
        raise BoundDomainError(f"|z|={abs(z)} 超过 R/2={R / 2}")
    if kappa is not None and R < 18 * kappa:
        raise BoundDomainError(f"R={R} 小于 18κ={18 * kappa}")
    t = 72.0 * abs(z) ** 2 / R
    return t * math.exp(t)
