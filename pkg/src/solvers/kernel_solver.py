"""
变换算子核求解器
Transformation Kernel Solver

在特征坐标 ξ=(t+x)/2、η=(t−x)/2 上以半步长 δ=h/2 的网格计算：
- 两个势函数之间的变换核 K = ΣK_n（逐次逼近）
- 逆变换核 L（Volterra 方程行推进）
- 复合核 B = K̃ + L + ∫K̃L，以及由边界数据 B(0,·) 迭代求 B

双重积分中 q(α±β) 的单元平均由 q 的二次原函数精确给出，
因此 q 的间断不会降低二阶精度。
"""

import logging
import math
from functools import lru_cache
from typing import Callable, List, Optional, Tuple, Union

import numpy as np

from ..models.kernel_grid import (KernelKind, NodalFunction, TriangularKernelGrid,
                                  mesh_size)
from ..models.potential import Potential
from ..utils.config_loader import get_section
from ..utils.exceptions import KernelConvergenceError

log = logging.getLogger(__name__)

# 允许的最大网格步长
MAX_STEP = 1.0 / 16
# 级数截断容差下限
MIN_TOL = 1e-12


def _cell_lattice(q: Potential, delta: float, n: int) -> np.ndarray:
    """
    q 在格点上的二阶差商

    d2[k] = (G2((k+1)δ) − 2G2(kδ) + G2((k−1)δ)) / δ²，k = 0..2n，
    G2 为 q 的二次原函数。d2[a′−b′] 与 d2[a′+b′+1] 分别是
    q(α−β) 与 q(α+β) 在单元 [a′δ,(a′+1)δ]×[b′δ,(b′+1)δ] 上的平均值。
    """
    ks = np.arange(-1, 2 * n + 2) * delta
    g2 = np.asarray(q.antiderivative(ks, order=2), dtype=complex)
    return (g2[2:] - 2.0 * g2[1:-1] + g2[:-2]) / delta ** 2


def _cell_average_F(q_minus: Potential, q_plus: Potential, delta: float, n: int) -> np.ndarray:
    """
    F(α,β) = q_minus(α−β) − q_plus(α+β) 的单元平均，形状 (n, n)

    只保留 b′ ≤ a′ − 1 的单元（落在 η ≤ ξ 的区域内）。
    """
    d_minus = _cell_lattice(q_minus, delta, n)
    d_plus = _cell_lattice(q_plus, delta, n)
    a = np.arange(n)[:, None]
    b = np.arange(n)[None, :]
    valid = b <= a - 1
    diff_idx = np.where(valid, a - b, 0)
    F = d_minus[diff_idx] - d_plus[a + b + 1]
    return np.where(valid, F, 0.0)


def _corner_mean(U: np.ndarray) -> np.ndarray:
    """单元四角平均，(n+1, n+1) → (n, n)"""
    return 0.25 * (U[:-1, :-1] + U[1:, :-1] + U[:-1, 1:] + U[1:, 1:])


def _lower_mask(n: int) -> np.ndarray:
    a = np.arange(n + 1)[:, None]
    b = np.arange(n + 1)[None, :]
    return b <= a


def _to_xt(U: np.ndarray, M: int) -> np.ndarray:
    """特征网格 U[a, b]（a=i+j，b=j−i）采样到 (x_i, t_j) 网格"""
    out = np.zeros((M + 1, 2 * M + 1), dtype=complex)
    i = np.arange(M + 1)[:, None]
    j = np.arange(2 * M + 1)[None, :]
    mask = (j >= i) & (i + j <= 2 * M)
    I, J = np.nonzero(mask)
    out[I, J] = U[I + J, J - I]
    return out


def _trapezoid_compose(A: np.ndarray, B: np.ndarray, h: float) -> np.ndarray:
    """
    ∫_x^t A(x,s) B(s,t) ds 的梯形近似

    A、B 为 (M+1, 2M+1) 的 (x, t) 网格；s > 1 时 B(s,t) 落在支撑外为 0，
    故对 s 的求和只到 s = 1。
    """
    M = A.shape[0] - 1
    idx = np.arange(M + 1)
    full = A[:, :M + 1] @ B
    diag_a = A[idx, idx]
    diag_b = np.zeros(2 * M + 1, dtype=complex)
    diag_b[:M + 1] = B[idx, idx]
    corr = 0.5 * diag_a[:, None] * B + 0.5 * A * diag_b[None, :]
    return h * (full - corr)


def _trapezoid_weights(n: int, h: float) -> np.ndarray:
    w = np.full(n, h)
    w[0] = w[-1] = 0.5 * h
    return w


class KernelSolver:
    """变换算子核求解器"""

    def __init__(self, config_path: Optional[str] = None):
        """
        初始化求解器

        Args:
            config_path: 系统配置文件路径（可选）
        """
        cfg = get_section('kernels', config_path)
        self.h = float(cfg.get('h', 1.0 / 64))
        self.tol = float(cfg.get('tol', 1e-12))
        self.max_terms = int(cfg.get('max_terms', 60))

    # ------------------------------------------------------------------
    # 参数检查
    # ------------------------------------------------------------------

    def _resolve(self, h: Optional[float], tol: Optional[float]) -> Tuple[float, float, int]:
        h = self.h if h is None else float(h)
        tol = self.tol if tol is None else float(tol)
        M = mesh_size(h)
        if h > MAX_STEP:
            raise ValueError(f"网格步长 h={h} 须不大于 {MAX_STEP}")
        if tol < MIN_TOL:
            raise ValueError(f"截断容差 tol={tol} 须不小于 {MIN_TOL}")
        return h, tol, M

    def _series(self, first: np.ndarray, step: Callable[[np.ndarray], np.ndarray],
                tol: float, label: str, keep_terms: bool) -> Tuple[np.ndarray, List[float], List[np.ndarray]]:
        """逐次逼近求和，直到 sup|term| < tol"""
        total = first.copy()
        term = first
        sups = [float(np.max(np.abs(first)))]
        terms = [first] if keep_terms else []
        while sups[-1] >= tol:
            if len(sups) >= self.max_terms:
                raise KernelConvergenceError(
                    f"{label} 级数在 {self.max_terms} 项内未收敛 (sup|项| = {sups[-1]:.3e})")
            term = step(term)
            total = total + term
            sups.append(float(np.max(np.abs(term))))
            if keep_terms:
                terms.append(term)
        log.debug("%s 级数 %d 项收敛，末项 %.3e", label, len(sups), sups[-1])
        return total, sups, terms

    # ------------------------------------------------------------------
    # K 核
    # ------------------------------------------------------------------

    def k_kernel(self, q1: Potential, q2: Potential, h: Optional[float] = None,
                 tol: Optional[float] = None) -> TriangularKernelGrid:
        """
        从 q1 到 q2 的变换核 K = ΣK_n

        K_0(x,t) = ½∫_{(t+x)/2}^1 (q2 − q1)，
        K_n(ξ,η) = ∫_ξ^1 dα ∫_0^η (q2(α−β) − q1(α+β)) K_{n−1}(α,β) dβ

        Args:
            q1: 出发势函数
            q2: 目标势函数
            h: 网格步长（默认取配置）
            tol: 截断容差（默认取配置）

        Returns:
            kind=K 的三角核网格
        """
        h, tol, M = self._resolve(h, tol)
        n = 2 * M
        delta = 0.5 * h
        xi = np.arange(n + 1) * delta
        mask = _lower_mask(n)

        k0_line = 0.5 * (np.asarray(q2.tail_integral(xi), dtype=complex)
                         - np.asarray(q1.tail_integral(xi), dtype=complex))
        first = np.where(mask, k0_line[:, None], 0.0)
        F = _cell_average_F(q2, q1, delta, n) * delta ** 2

        def step(U: np.ndarray) -> np.ndarray:
            C = F * _corner_mean(U)
            P = np.zeros((n, n + 1), dtype=complex)
            P[:, 1:] = np.cumsum(C, axis=1)
            out = np.zeros((n + 1, n + 1), dtype=complex)
            out[:n] = np.cumsum(P[::-1], axis=0)[::-1]
            return np.where(mask, out, 0.0)

        total, sups, _ = self._series(first, step, tol, "K", keep_terms=False)
        Q_eff = max(q1.l1_norm(), q2.l1_norm())
        meta = {'q1': q1, 'q2': q2, 'Q_eff': Q_eff, 'terms': len(sups), 'term_sups': sups}
        return TriangularKernelGrid(h, _to_xt(total, M), KernelKind.K, meta)

    @staticmethod
    def sup_bound(Q: float) -> float:
        """|K| ≤ Q·e^{2Q}"""
        return Q * math.exp(2.0 * Q)

    # ------------------------------------------------------------------
    # L 核与复合
    # ------------------------------------------------------------------

    def l_kernel(self, K: TriangularKernelGrid) -> TriangularKernelGrid:
        """
        解 0 = K + L + ∫_x^t K(x,s) L(s,t) ds

        从 x = 1 行向 x = 0 行推进；每行内 L(x,t) 只依赖已求出的
        较大 x 的行，本行未知量只出现在 s = x 的梯形端点项中。

        Args:
            K: kind=K 的核网格

        Returns:
            同一网格上的 L
        """
        if K.kind is not KernelKind.K:
            raise ValueError(f"l_kernel 需要 K 核，得到 {K.kind.value}")
        h, M = K.h, K.M
        Kv = K.values
        L = np.zeros_like(Kv)
        diag_l = np.zeros(2 * M + 1, dtype=complex)
        for i in range(M, -1, -1):
            L[i, i] = -Kv[i, i]
            diag_l[i] = L[i, i]
            js = np.arange(i + 1, 2 * M - i + 1)
            if js.size == 0:
                continue
            full = Kv[i, i + 1:M + 1] @ L[i + 1:M + 1, :]
            inner = full[js] - 0.5 * Kv[i, js] * diag_l[js]
            L[i, js] = (-Kv[i, js] - h * inner) / (1.0 + 0.5 * h * Kv[i, i])
        meta = dict(K.meta)
        meta['source'] = 'l_kernel'
        return TriangularKernelGrid(h, L, KernelKind.L, meta)

    def compose_B(self, K_tilde: TriangularKernelGrid, L: TriangularKernelGrid) -> TriangularKernelGrid:
        """
        B = K̃ + L + ∫_x^t K̃(x,s) L(s,t) ds

        Args:
            K_tilde: 0 → q̃ 的变换核
            L: q → 0 的逆变换核

        Returns:
            q → q̃ 的变换核 B
        """
        K_tilde.check_mesh(L)
        values = K_tilde.values + L.values + _trapezoid_compose(K_tilde.values, L.values, K_tilde.h)
        meta = {'K_tilde': K_tilde.meta, 'L': L.meta}
        return TriangularKernelGrid(K_tilde.h, values, KernelKind.B, meta)

    def composition_residual(self, K: TriangularKernelGrid, L: TriangularKernelGrid) -> float:
        """反序恒等式 K + L + ∫_x^t L(x,s) K(s,t) ds 的最大模"""
        K.check_mesh(L)
        res = K.values + L.values + _trapezoid_compose(L.values, K.values, K.h)
        res[~K.support_mask()] = 0.0
        return float(np.max(np.abs(res)))

    # ------------------------------------------------------------------
    # 边界数据
    # ------------------------------------------------------------------

    @staticmethod
    def _sample(func, t_nodes: np.ndarray) -> np.ndarray:
        if callable(func):
            return np.asarray(func(t_nodes), dtype=complex).reshape(t_nodes.shape)
        values = np.asarray(func, dtype=complex)
        if values.shape != t_nodes.shape:
            raise ValueError(f"边界数据长度 {values.shape} 与 t 网格 {t_nodes.shape} 不符")
        return values

    def boundary_B0(self, D: Union[Callable, np.ndarray], L: TriangularKernelGrid) -> NodalFunction:
        """
        B(0,t) = D(t) + ∫_0^t D(s) L(s,t) ds

        Args:
            D: t ↦ (K̃ − K)(0,t)，函数或 t 节点上的取值
            L: q → 0 的逆变换核

        Returns:
            t 节点上的 B(0,·)
        """
        M = L.M
        t_nodes = L.t_nodes
        d = self._sample(D, t_nodes)
        idx = np.arange(M + 1)
        diag_l = np.zeros(2 * M + 1, dtype=complex)
        diag_l[:M + 1] = L.values[idx, idx]
        full = d[:M + 1] @ L.values
        corr = 0.5 * d[0] * L.values[0] + 0.5 * d * diag_l
        values = d + L.h * (full - corr)
        return NodalFunction(t_nodes, values)

    def b_from_boundary(self, B0: Union[Callable, np.ndarray], q: Potential, q_tilde: Potential,
                        h: Optional[float] = None, tol: Optional[float] = None,
                        keep_terms: bool = False) -> TriangularKernelGrid:
        """
        由 B(0,·) 与 B(x,2−x)=0 求 B = ΣB_n

        B_0(x,t) = B(0,x+t)，
        B_{n+1}(ξ,η) = ∫_ξ^1 dα ∫_η^ξ (q(α+β) − q̃(α−β)) B_n(α,β) dβ

        Args:
            B0: t ↦ B(0,t)，函数或 t 节点上的取值；t = 2 处强制为 0
            q: 出发势函数
            q_tilde: 目标势函数
            h: 网格步长（默认取配置）
            tol: 截断容差（默认取配置）
            keep_terms: 是否在 meta['term_grids'] 中保留各项 B_n

        Returns:
            kind=B 的三角核网格
        """
        h, tol, M = self._resolve(h, tol)
        n = 2 * M
        delta = 0.5 * h
        t_nodes = np.arange(n + 1) * h
        b0 = self._sample(B0, t_nodes).copy()
        b0[-1] = 0.0
        mask = _lower_mask(n)
        first = np.where(mask, b0[:, None], 0.0)
        # F = q(α+β) − q̃(α−β) = −(q̃(α−β) − q(α+β))
        F = -_cell_average_F(q_tilde, q, delta, n) * delta ** 2
        rows = np.arange(n)

        def step(U: np.ndarray) -> np.ndarray:
            C = F * _corner_mean(U)
            P = np.zeros((n, n + 1), dtype=complex)
            P[:, 1:] = np.cumsum(C, axis=1)
            RP = np.cumsum(P[::-1], axis=0)[::-1]
            out = np.zeros((n + 1, n + 1), dtype=complex)
            out[:n] = RP[rows, rows][:, None] - RP
            return np.where(mask, out, 0.0)

        total, sups, terms = self._series(first, step, tol, "B", keep_terms)
        meta = {'q': q, 'q_tilde': q_tilde, 'Q_eff': max(q.l1_norm(), q_tilde.l1_norm()),
                'B0_sup': float(np.max(np.abs(b0))), 'terms': len(sups), 'term_sups': sups}
        if keep_terms:
            meta['term_grids'] = [_to_xt(T, M) for T in terms]
        return TriangularKernelGrid(h, _to_xt(total, M), KernelKind.B, meta)

    # ------------------------------------------------------------------
    # 边界行相关量
    # ------------------------------------------------------------------

    def ht_boundary(self, K: TriangularKernelGrid, q1: Optional[Potential] = None,
                    q2: Optional[Potential] = None) -> NodalFunction:
        """
        H_t(0,t)，H = K − K_0，沿 t 的中心差分

        Args:
            K: k_kernel 的结果
            q1, q2: 势函数（默认取 K.meta）

        Returns:
            t 节点上的 H_t(0,·)
        """
        q1 = q1 if q1 is not None else K.meta['q1']
        q2 = q2 if q2 is not None else K.meta['q2']
        t = K.t_nodes
        k0 = 0.5 * (np.asarray(q2.tail_integral(t / 2), dtype=complex)
                    - np.asarray(q1.tail_integral(t / 2), dtype=complex))
        H = K.boundary_row() - k0
        return NodalFunction(t, np.gradient(H, K.h, edge_order=2))

    def asymptotic_remainder(self, K: TriangularKernelGrid, q: Optional[Potential] = None) -> NodalFunction:
        """
        g(t) = q(t/2) − 4H_t(0,t)（K 为 0 → q 的变换核）

        使得 ψ(z) = 1 + iK(0,0)/z − (i/4z)∫_0^2 g(t)e^{izt}dt
        """
        q = q if q is not None else K.meta['q2']
        t = K.t_nodes
        ht = self.ht_boundary(K, Potential.zero(), q)
        return NodalFunction(t, np.asarray(q.evaluate(t / 2), dtype=complex) - 4.0 * ht.values)

    def jost_from_kernel(self, K: TriangularKernelGrid, z):
        """ψ(z) = 1 + ∫_0^2 K(0,t) e^{izt} dt（梯形求积）"""
        za = np.atleast_1d(np.asarray(z, dtype=complex))
        t = K.t_nodes
        w = _trapezoid_weights(t.size, K.h) * K.boundary_row()
        out = 1.0 + np.exp(1j * np.outer(za, t)) @ w
        return complex(out[0]) if np.ndim(z) == 0 else out


@lru_cache(maxsize=1)
def default_kernel_solver() -> KernelSolver:
    return KernelSolver()


def k_kernel(q1: Potential, q2: Potential, h: Optional[float] = None,
             tol: Optional[float] = None) -> TriangularKernelGrid:
    return default_kernel_solver().k_kernel(q1, q2, h, tol)


def l_kernel(K: TriangularKernelGrid) -> TriangularKernelGrid:
    return default_kernel_solver().l_kernel(K)


def compose_B(K_tilde: TriangularKernelGrid, L: TriangularKernelGrid) -> TriangularKernelGrid:
    return default_kernel_solver().compose_B(K_tilde, L)


def composition_residual(K: TriangularKernelGrid, L: TriangularKernelGrid) -> float:
    return default_kernel_solver().composition_residual(K, L)


def boundary_B0(D, L: TriangularKernelGrid) -> NodalFunction:
    return default_kernel_solver().boundary_B0(D, L)


def b_from_boundary(B0, q: Potential, q_tilde: Potential, h: Optional[float] = None,
                    tol: Optional[float] = None, keep_terms: bool = False) -> TriangularKernelGrid:
    return default_kernel_solver().b_from_boundary(B0, q, q_tilde, h, tol, keep_terms)


def ht_boundary(K: TriangularKernelGrid, q1: Optional[Potential] = None,
                q2: Optional[Potential] = None) -> NodalFunction:
    return default_kernel_solver().ht_boundary(K, q1, q2)


def asymptotic_remainder(K: TriangularKernelGrid, q: Optional[Potential] = None) -> NodalFunction:
    return default_kernel_solver().asymptotic_remainder(K, q)


def jost_from_kernel(K: TriangularKernelGrid, z):
    return default_kernel_solver().jost_from_kernel(K, z)
