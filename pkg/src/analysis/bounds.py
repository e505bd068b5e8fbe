"""
界估计
Bound Evaluators

稳定性估计中出现的显式常数与包络形状，以及用实验数据拟合包络常数。
包络只给出形状，其中的存在性常数一律通过拟合得到。
"""

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np

from ..models.potential import Potential
from ..utils.exceptions import BoundDomainError

ArrayLike = Union[float, np.ndarray]

# 扰动水平上限（不含）
MAX_EPS = 0.75


def _as_output(values: np.ndarray):
    return float(values) if np.ndim(values) == 0 else values


def _check_p(p: float):
    if not (1.0 < p <= 2.0):
        raise BoundDomainError(f"指数 p={p} 须在 (1, 2] 内")


def _check_R(R: float, floor: float = math.e):
    if not (R >= floor):
        raise BoundDomainError(f"R={R} 须不小于 {floor:.6g}")


def _check_eps(eps: float):
    if not (0.0 <= eps < MAX_EPS):
        raise BoundDomainError(f"扰动水平 ε={eps} 须在 [0, 3/4) 内")


# ---------------------------------------------------------------------------
# 参数
# ---------------------------------------------------------------------------

def kappa(Q: float) -> float:
    """
    Jost 函数界常数 κ(Q) = 1 + 2Q·e^{2Q}

    对 q ∈ B(Q) 同时满足：实轴上 |ψ| ≤ κ；|ψ(z)| ≤ κe^{2|z|}；
    在圆盘 |z − 3iρ| ≤ ρ 内 |ψ − 1| ≤ κ/ρ。
    """
    if Q < 0:
        raise BoundDomainError(f"L1 预算 Q={Q} 不能为负")
    return 1.0 + 2.0 * Q * math.exp(2.0 * Q)


def default_rho(R: float) -> float:
    """ρ = R^{1/3}"""
    return R ** (1.0 / 3.0)


def nu_exponent(p: float) -> float:
    """ν = (p−1)/(6p)"""
    _check_p(p)
    return (p - 1.0) / (6.0 * p)


def gamma_exponent(p: float) -> float:
    """γ = (p−1)/p"""
    _check_p(p)
    return (p - 1.0) / p


@dataclass(frozen=True)
class BoundParams:
    """界公式的参数集合"""

    Q: float
    p: float = 2.0
    R: float = math.e
    eps: float = 0.0
    Q_p: float = 0.0
    rho: Optional[float] = None

    def __post_init__(self):
        if self.Q < 0 or self.Q_p < 0:
            raise BoundDomainError(f"范数预算不能为负: Q={self.Q}, Q_p={self.Q_p}")
        _check_p(self.p)
        _check_R(self.R)
        _check_eps(self.eps)
        if self.rho is None:
            object.__setattr__(self, 'rho', default_rho(self.R))

    @classmethod
    def from_potentials(cls, q: Potential, q_tilde: Potential, p: float = 2.0,
                        R: float = math.e, eps: float = 0.0) -> "BoundParams":
        Q = max(q.l1_norm(), q_tilde.l1_norm())
        return cls(Q=Q, p=p, R=R, eps=eps, Q_p=q_tilde.subtract(q).lp_norm(p))

    @property
    def kappa(self) -> float:
        return kappa(self.Q)

    @property
    def nu(self) -> float:
        return nu_exponent(self.p)

    @property
    def gamma(self) -> float:
        return gamma_exponent(self.p)

    @property
    def counting_rho(self) -> float:
        """计数界使用的 ρ，至少为 2κ"""
        return max(self.rho, 2.0 * self.kappa)


# ---------------------------------------------------------------------------
# 计数与乘积
# ---------------------------------------------------------------------------

def jensen_bound(rho: float, kappa_value: float, r: ArrayLike) -> ArrayLike:
    """
    以 3iρ 为中心半径 r 的圆盘内零点数上界 log(2κ) + 6ρ + 2er

    Args:
        rho: 中心高度参数（须 ≥ 2κ）
        kappa_value: κ
        r: 半径（标量或数组）

    Returns:
        上界
    """
    if kappa_value < 1:
        raise BoundDomainError(f"κ={kappa_value} 须不小于 1")
    if rho < 2.0 * kappa_value:
        raise BoundDomainError(f"ρ={rho} 须不小于 2κ={2.0 * kappa_value}")
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise BoundDomainError("半径不能为负")
    return _as_output(math.log(2.0 * kappa_value) + 6.0 * rho + 2.0 * math.e * r)


def elementary_log_bound(w: ArrayLike) -> ArrayLike:
    """|log E(w)| ≤ 2|w|²，|w| ≤ 1/2"""
    w = np.abs(np.asarray(w, dtype=complex))
    if np.any(w > 0.5):
        raise BoundDomainError("初等因子界要求 |w| ≤ 1/2")
    return _as_output(2.0 * w ** 2)


def exponential_factor_bound(eps: float) -> float:
    """|e^{a1 z + a0} − 1| 从 |z − 3iρ| ≤ ρ 传到 |z| ≤ ρ：5ε/(1−ε)·exp(5ε/(1−ε))"""
    if not (0.0 <= eps < 1.0):
        raise BoundDomainError(f"ε={eps} 须在 [0, 1) 内")
    u = 5.0 * eps / (1.0 - eps)
    return u * math.exp(u)


def log_w_bound(R: float, eps: float) -> float:
    """|log W(z)| ≤ 17e·ε·R^{1/6}（|z| ≤ R^{1/6}）"""
    _check_R(R)
    _check_eps(eps)
    return 17.0 * math.e * eps * R ** (1.0 / 6.0)


# ---------------------------------------------------------------------------
# 包络形状
# ---------------------------------------------------------------------------

def theorem31_envelope(R: ArrayLike) -> ArrayLike:
    """圆盘内零点一致时 Jost 函数差的形状 R^{−1/3}"""
    R = np.asarray(R, dtype=float)
    if np.any(R < math.e):
        raise BoundDomainError("R 须不小于 e")
    return _as_output(R ** (-1.0 / 3.0))


def _min_shape(numer: ArrayLike, t: ArrayLike, R: float, nu: float) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    with np.errstate(divide='ignore', invalid='ignore'):
        ratio = np.where(t > 0, numer / (t * R ** nu), np.inf)
    return np.minimum(1.0, ratio)


def theorem41_envelope(t: ArrayLike, R: float, p: float, diff_norm: float = 0.0) -> ArrayLike:
    """
    边界核差的形状 (p−1)^{−1/p}(1 + ‖q̃−q‖_p)·min(1, 1/(tR^ν))

    Args:
        t: 位置（≥ 0）
        R: 圆盘半径
        p: Lp 指数
        diff_norm: ‖q̃ − q‖_p

    Returns:
        形状值
    """
    _check_R(R)
    nu = nu_exponent(p)
    prefactor = (p - 1.0) ** (-1.0 / p) * (1.0 + diff_norm)
    return _as_output(prefactor * _min_shape(1.0, t, R, nu))


def corollary42_envelope(t: ArrayLike, R: float, p: float, diff_norm: float = 0.0) -> ArrayLike:
    """|B(0,t)| 的形状 (p−1)^{−1/p}(1 + ‖q̃−q‖_p)·min(1, log R/(tR^ν))"""
    _check_R(R)
    nu = nu_exponent(p)
    prefactor = (p - 1.0) ** (-1.0 / p) * (1.0 + diff_norm)
    return _as_output(prefactor * _min_shape(math.log(R), t, R, nu))


def tail_envelope_shape(t: ArrayLike, Rband: float, p: float) -> ArrayLike:
    """min(1, 1/(t·Rband^ν))，不含常数"""
    if Rband <= 0:
        raise BoundDomainError(f"Rband={Rband} 必须为正")
    return _as_output(_min_shape(1.0, t, Rband, nu_exponent(p)))


def lemma51_envelope(n: int, x: ArrayLike, t: ArrayLike, C1: float, C0: float,
                     R2: float, Q: float) -> ArrayLike:
    """
    |B_n(x,t)| ≤ (C1 + C0·log(2R2)/R2)·(2Q)^n/(n−1)!·(1 − (t+x)/2)^{n−1}

    Args:
        n: 项序号（≥ 1）
        x, t: 位置
        C1, C0, R2: 边界数据 |B(0,t)| ≤ C1 + C0·min(1, 1/(tR2)) 中的常数
        Q: L1 预算

    Returns:
        包络值
    """
    if n < 1:
        raise BoundDomainError(f"项序号 n={n} 须不小于 1")
    _check_R(R2)
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    base = np.clip(1.0 - 0.5 * (t + x), 0.0, None)
    amp = (C1 + C0 * math.log(2.0 * R2) / R2) * (2.0 * Q) ** n / math.factorial(n - 1)
    return _as_output(amp * base ** (n - 1))


def lemma52_envelope(x: ArrayLike, t: ArrayLike, C1: float, C0: float, R2: float, Q: float) -> ArrayLike:
    """|B(x,t)| ≤ (C1 + C0·log R2/((x+t)R2))·(1 + 8Q·e^{2Q})"""
    _check_R(R2)
    s = np.asarray(x, dtype=float) + np.asarray(t, dtype=float)
    with np.errstate(divide='ignore', invalid='ignore'):
        inner = C1 + np.where(s > 0, C0 * math.log(R2) / (s * R2), np.inf if C0 > 0 else 0.0)
    return _as_output(inner * (1.0 + 8.0 * Q * math.exp(2.0 * Q)))


def theorem53_envelope(R: ArrayLike, p: float) -> ArrayLike:
    """零点一致时尾积分误差的形状 (log R)^{(2p−2)/(2p−1)}·R^{−(p−1)²/(6p(2p−1))}"""
    _check_p(p)
    R = np.asarray(R, dtype=float)
    if np.any(R < math.e):
        raise BoundDomainError("R 须不小于 e")
    a = (2.0 * p - 2.0) / (2.0 * p - 1.0)
    b = (p - 1.0) ** 2 / (6.0 * p * (2.0 * p - 1.0))
    return _as_output(np.log(R) ** a * R ** (-b))


def perturbation_term(R: ArrayLike, eps: ArrayLike) -> ArrayLike:
    """零点扰动项 ε·R^{1/6}·log R·exp(17e·ε·R^{1/6})"""
    R = np.asarray(R, dtype=float)
    eps = np.asarray(eps, dtype=float)
    s = eps * R ** (1.0 / 6.0)
    return _as_output(s * np.log(R) * np.exp(17.0 * math.e * s))


def theorem61_envelope(R: ArrayLike, eps: ArrayLike, p: float) -> ArrayLike:
    """
    零点扰动 ε 下尾积分误差的形状

    (log R)^{(2p−2)/(2p−1)}·R^{−(p−1)²/(6p(2p−1))} + ε·R^{1/6}·log R·exp(17e·ε·R^{1/6})

    Args:
        R: 圆盘半径（≥ e）
        eps: 扰动水平，[0, 3/4)
        p: Lp 指数

    Returns:
        形状值
    """
    eps_arr = np.asarray(eps, dtype=float)
    if np.any(eps_arr < 0) or np.any(eps_arr >= MAX_EPS):
        raise BoundDomainError(f"扰动水平 ε={eps} 须在 [0, 3/4) 内")
    return _as_output(np.asarray(theorem53_envelope(R, p)) + np.asarray(perturbation_term(R, eps_arr)))


# ---------------------------------------------------------------------------
# 常数拟合
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EnvelopeFit:
    """包络常数拟合结果"""

    constant: float
    residual: float
    relative_residual: float
    mode: str

    def __call__(self, shape: ArrayLike) -> ArrayLike:
        return _as_output(self.constant * np.asarray(shape, dtype=float))


def _pairs_array(pairs: Iterable[Tuple[float, float]]) -> Tuple[np.ndarray, np.ndarray]:
    data = np.asarray(list(pairs), dtype=float).reshape(-1, 2)
    if data.shape[0] < 3:
        raise ValueError(f"拟合至少需要 3 组数据，得到 {data.shape[0]}")
    shapes, empirical = data[:, 0], data[:, 1]
    if np.any(shapes <= 0):
        raise ValueError("包络形状值必须为正")
    return shapes, empirical


def fit_envelope(pairs: Sequence[Tuple[float, float]], mode: str = 'least_squares') -> EnvelopeFit:
    """
    拟合包络常数 C

    Args:
        pairs: (形状值, 实测值) 列表
        mode: 'least_squares' 最小化 Σ(实测 − C·形状)²；
              'dominating' 取使 C·形状 ≥ 实测 的最小 C

    Returns:
        EnvelopeFit（residual 为 ‖实测 − C·形状‖₂，relative_residual 为其与 ‖实测‖₂ 之比）
    """
    shapes, empirical = _pairs_array(pairs)
    if mode == 'least_squares':
        C = float(np.dot(shapes, empirical) / np.dot(shapes, shapes))
    elif mode == 'dominating':
        C = float(np.max(empirical / shapes))
    else:
        raise ValueError(f"未知拟合模式: {mode}")
    C = max(C, 0.0)
    residual = float(np.linalg.norm(empirical - C * shapes))
    norm = float(np.linalg.norm(empirical))
    relative = residual / norm if norm > 0 else 0.0
    return EnvelopeFit(C, residual, relative, mode)


def fit_constant(pairs: Sequence[Tuple[float, float]]) -> float:
    """最小二乘常数 C（截断到 ≥ 0）"""
    return fit_envelope(pairs, 'least_squares').constant
