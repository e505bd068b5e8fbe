"""
尾积分重构
Tail-Integral Reconstruction

反演流程：Jost 函数差 → Fourier 反演得到边界核差 D(t) = (K̃ − K)(0,t)
→ B(0,t) = D + ∫D·L → 估计 x ↦ ∫_x^1 (q̃ − q) = 2B(x,x)。
零点集合经 Hadamard 分解给出 ψ̃ 的模型。
"""

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.special import sici

from ..models.kernel_grid import NodalFunction, mesh_size
from ..models.potential import Potential
from ..models.zero_set import ZeroSet
from ..solvers.jost_solver import ForwardJost, JostSolver
from ..solvers.kernel_solver import KernelSolver
from ..utils.config_loader import get_section
from ..utils.exceptions import ConfigError
from . import bounds
from .factorization import CALIBRATION_DEGREES, DEFAULT_CALIBRATION_DEGREE, normalize

log = logging.getLogger(__name__)

# 重构要求的最小圆盘半径
MIN_DISC_RADIUS = 20.0


@lru_cache(maxsize=8)
def clenshaw_curtis(n: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    [−1, 1] 上 n+1 点 Clenshaw–Curtis 节点与权重（n 为偶数）

    Args:
        n: 阶数

    Returns:
        (nodes, weights)
    """
    if n < 2 or n % 2:
        raise ValueError(f"Clenshaw–Curtis 阶数须为正偶数，得到 {n}")
    theta = np.pi * np.arange(n + 1) / n
    nodes = np.cos(theta)
    weights = np.zeros(n + 1)
    inner = theta[1:-1]
    v = np.ones(n - 1)
    for k in range(1, n // 2):
        v -= 2.0 * np.cos(2 * k * inner) / (4 * k * k - 1)
    v -= np.cos(n * inner) / (n * n - 1)
    weights[0] = weights[-1] = 1.0 / (n * n - 1)
    weights[1:-1] = 2.0 * v / n
    return nodes, weights


def pv_tail(a: float, t):
    """
    (i/2π)·PV∫_{|z|>a} e^{−izt}/z dz = sign(t)·(π/2 − Si(a|t|))/π

    t = 0 处取主值 0。
    """
    t = np.asarray(t, dtype=float)
    si, _ = sici(a * np.abs(t))
    out = np.sign(t) * (0.5 * np.pi - si) / np.pi
    return float(out) if out.ndim == 0 else out


def pv_tail_kernel(Rband: float, t):
    """
    主值尾核 (i/2π)∫_{|z|>Rband^{1/6}} e^{−izt}/z dz

    Args:
        Rband: 频带分割半径（> 0）
        t: 位置（≥ 0）

    Returns:
        核值（实数）
    """
    if Rband <= 0:
        raise ValueError(f"Rband={Rband} 必须为正")
    return pv_tail(Rband ** (1.0 / 6.0), t)


@dataclass
class BoundaryKernelDiff:
    """
    边界核差 D(t) = (K̃ − K)(0,t) 的采样

    window 为反演积分半宽 Z；c0 为 1/z 尾部系数估计；tail_R 为频带分割半径。
    """

    t_grid: np.ndarray
    values: np.ndarray
    window: float
    tail_R: Optional[float] = None
    c0: complex = 0j
    warnings: List[str] = field(default_factory=list)

    def __call__(self, t):
        return NodalFunction(self.t_grid, self.values)(t)

    def sup(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0


@dataclass
class ReconstructionResult:
    """重构结果：x 节点上的 ∫_x^1 (q̃ − q) 估计与诊断信息"""

    estimate: NodalFunction
    diagnostics: Dict[str, Any] = field(default_factory=dict)
    truth: Optional[NodalFunction] = None

    def __call__(self, x):
        return self.estimate(x)

    @property
    def x(self) -> np.ndarray:
        return self.estimate.nodes

    def sup_norm(self) -> float:
        return self.estimate.sup()

    def sup_error(self) -> Optional[float]:
        if self.truth is None:
            return None
        return float(np.max(np.abs(self.estimate.values - self.truth.values)))


class Reconstructor:
    """尾积分重构器"""

    def __init__(self, config_path: Optional[str] = None):
        """
        初始化重构器

        Args:
            config_path: 系统配置文件路径（可选）
        """
        cfg = get_section('reconstruction', config_path)
        self.p = float(cfg.get('p', 2.0))
        self.panel_width = float(cfg.get('panel_width', math.pi / 4))
        self.panel_order = int(cfg.get('panel_order', 16))
        self.min_window = float(cfg.get('min_window', 20.0))
        self.tail_ratio_limit = float(cfg.get('tail_ratio_limit', 3.0))
        self.window_exponent = float(cfg.get('window_exponent', 1.0 / 6.0))
        self.target_mode = cfg.get('target_mode', 'reference')
        self.calibration_degree = int(cfg.get('calibration_degree', DEFAULT_CALIBRATION_DEGREE))
        self.refine = bool(cfg.get('refine', False))
        self.max_refine_iter = int(cfg.get('max_refine_iter', 5))
        self.refine_tol = float(cfg.get('refine_tol', 1e-4))
        self.h = float(cfg.get('h', 1.0 / 64))

        self.jost_solver = JostSolver(config_path)
        self.kernel_solver = KernelSolver(config_path)

    # ------------------------------------------------------------------
    # Fourier 反演
    # ------------------------------------------------------------------

    def _panel_rule(self, a: float, b: float) -> Tuple[np.ndarray, np.ndarray]:
        """[a, b] 上的复合 Clenshaw–Curtis 规则"""
        n_panels = max(1, int(math.ceil((b - a) / self.panel_width)))
        edges = np.linspace(a, b, n_panels + 1)
        x, w = clenshaw_curtis(self.panel_order)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[:-1] + edges[1:])
        nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
        weights = (half[:, None] * w[None, :]).ravel()
        return nodes, weights

    def _estimate_c0(self, nodes: np.ndarray, weights: np.ndarray, vals: np.ndarray,
                     Z: float) -> Tuple[complex, complex, complex]:
        """在外侧频带 [Z/2, Z] 上平均 −i·z·df(z)"""
        sides = []
        for sign in (1.0, -1.0):
            band = (sign * nodes >= 0.5 * Z)
            wsum = np.sum(weights[band])
            sides.append(complex(np.sum(weights[band] * (-1j) * nodes[band] * vals[band]) / wsum))
        c_right, c_left = sides
        return 0.5 * (c_right + c_left), c_right, c_left

    def fourier_invert_diff(self, df: Callable, Z: float, t_grid,
                            tail_correction: bool = True) -> BoundaryKernelDiff:
        """
        D(t) = (1/2π)∫_{−Z}^{Z} df(z) e^{−izt} dz + c0·PV 尾项

        Args:
            df: 实轴上的 z ↦ ψ̃(z) − ψ(z)（接受数组）
            Z: 窗口半宽
            t_grid: [0, 2] 上的 t 节点
            tail_correction: 是否加入 1/z 尾部修正并在 t=0 取单侧极限

        Returns:
            BoundaryKernelDiff
        """
        if not (Z > 0):
            raise ValueError(f"窗口半宽 Z={Z} 必须为正")
        t = np.asarray(t_grid, dtype=float)
        warnings = []
        if Z < self.min_window:
            warnings.append(f"窗口半宽 Z={Z:.4g} 小于 {self.min_window:g}")
            log.info(warnings[-1])

        nodes, weights = self._panel_rule(-Z, Z)
        vals = np.asarray(df(nodes), dtype=complex).reshape(nodes.shape)
        values = (np.exp(-1j * np.outer(t, nodes)) @ (weights * vals)) / (2.0 * np.pi)

        c0 = 0j
        if tail_correction:
            c0, c_right, c_left = self._estimate_c0(nodes, weights, vals, Z)
            big, small = max(abs(c_right), abs(c_left)), min(abs(c_right), abs(c_left))
            if big > 1e-12 and big > self.tail_ratio_limit * small:
                warnings.append(f"±Z 两侧尾部估计不一致: {c_right:.3g} vs {c_left:.3g}")
                log.warning(warnings[-1])
            values = values + c0 * np.asarray(pv_tail(Z, t))
            # 反演在 t=0 给出跳跃两侧的平均值，改用线性外推的单侧极限
            if t.size >= 3 and t[0] == 0.0:
                values[0] = values[1] + (values[1] - values[2]) * (t[1] / (t[2] - t[1]))
        values[t >= 2.0] = 0.0

        return BoundaryKernelDiff(t, values, float(Z), None, complex(c0), warnings)

    def band_split_diff(self, df: Callable, Rband: float, t_grid,
                        p: Optional[float] = None) -> Tuple[BoundaryKernelDiff, Callable]:
        """
        频带分割：|z| ≤ Rband^{1/6} 部分的反演与尾部包络形状

        Args:
            df: 实轴上的 Jost 函数差
            Rband: 分割半径
            t_grid: t 节点
            p: Lp 指数（默认取配置）

        Returns:
            (I_part, tail_envelope)，tail_envelope(t) = min(1, 1/(t·Rband^ν))
        """
        p = self.p if p is None else float(p)
        band = Rband ** (1.0 / 6.0)
        inner = self.fourier_invert_diff(df, band, t_grid, tail_correction=False)
        nodes, weights = self._panel_rule(-band, band)
        vals = np.asarray(df(nodes), dtype=complex).reshape(nodes.shape)
        inner.c0 = self._estimate_c0(nodes, weights, vals, band)[0]
        inner.tail_R = float(Rband)

        def tail_envelope(t):
            return bounds.tail_envelope_shape(t, Rband, p)

        return inner, tail_envelope

    # ------------------------------------------------------------------
    # 重构流程
    # ------------------------------------------------------------------

    def _zeroth_order(self, B0: NodalFunction, M: int) -> np.ndarray:
        """est(x_i) = 2·B(0, 2x_i)"""
        est = 2.0 * np.asarray(B0.values[0:2 * M + 1:2], dtype=complex)
        est[-1] = 0.0
        return est

    def _refine(self, B0: NodalFunction, q_ref: Potential, est0: np.ndarray,
                h: float) -> Tuple[np.ndarray, Dict[str, Any]]:
        """不动点修正：q̃⁽ᵏ⁺¹⁾ = q_ref − d/dx est⁽ᵏ⁾"""
        x = np.arange(est0.size) * h
        q_tilde = q_ref
        prev = est0
        history = []
        status = 'max_iter'
        for _ in range(self.max_refine_iter):
            B = self.kernel_solver.b_from_boundary(B0.values, q_ref, q_tilde, h)
            new = 2.0 * B.diagonal_values()
            new[-1] = 0.0
            change = float(np.max(np.abs(new - prev)))
            history.append(change)
            if len(history) >= 2 and change > history[-2]:
                log.warning("不动点修正发散 (%.3e > %.3e)，返回零阶估计", change, history[-2])
                return est0, {'refine_status': 'diverged', 'refine_history': history}
            prev = new
            if change < self.refine_tol:
                status = 'converged'
                break
            q_tilde = q_ref.add(Potential.from_samples(x, -np.gradient(new, h)))
        return prev, {'refine_status': status, 'refine_history': history}

    def reconstruct_from_zeros(self, zs_tilde: ZeroSet, q_ref: Potential, p: Optional[float] = None,
                               h: Optional[float] = None, target_mode: Optional[str] = None,
                               calibration_degree: Optional[int] = None, refine: Optional[bool] = None,
                               truth: Optional[Potential] = None) -> ReconstructionResult:
        """
        由零点集合重构 ∫_x^1 (q̃ − q_ref)

        Args:
            zs_tilde: q̃ 的零点集合（圆盘半径 R ≥ 20）
            q_ref: 参考势函数
            p: Lp 指数（仅影响诊断中的包络指数）
            h: 核网格步长
            target_mode: 'reference'（标定目标取 ψ_ref，q_ref ≡ 0 时即 ≡ 1）或 'unit'（目标 ≡ 1）
            calibration_degree: 标定多项式 g 的次数
            refine: 是否执行不动点修正
            truth: 真实势函数（可选，用于误差列）

        Returns:
            ReconstructionResult
        """
        p = self.p if p is None else float(p)
        h = self.h if h is None else float(h)
        target_mode = target_mode or self.target_mode
        degree = self.calibration_degree if calibration_degree is None else int(calibration_degree)
        refine = self.refine if refine is None else bool(refine)
        if target_mode not in ('unit', 'reference'):
            raise ConfigError(f"未知标定目标模式: {target_mode}")
        if degree not in CALIBRATION_DEGREES:
            raise ConfigError(f"标定次数须在 {CALIBRATION_DEGREES} 内，得到 {degree}")
        R = float(zs_tilde.R)
        if R < MIN_DISC_RADIUS:
            raise ConfigError(f"圆盘半径 R={R} 小于 {MIN_DISC_RADIUS:g}")
        M = mesh_size(h)

        ref_model = ForwardJost(q_ref, self.jost_solver)
        model = normalize(zs_tilde, reference=ref_model if target_mode == 'reference' else None,
                          degree=degree)
        log.info("重构: R=%.4g, 零点数 %d, 标定 g=%s", R, zs_tilde.total_multiplicity,
                 model.g_coeffs)

        def df(z):
            return np.asarray(model.evaluate(z), dtype=complex) - np.asarray(ref_model.evaluate(z), dtype=complex)

        Z = R ** self.window_exponent
        K_ref = self.kernel_solver.k_kernel(Potential.zero(), q_ref, h)
        L_ref = self.kernel_solver.l_kernel(K_ref)
        D = self.fourier_invert_diff(df, Z, K_ref.t_nodes)
        B0 = self.kernel_solver.boundary_B0(D.values, L_ref)
        est = self._zeroth_order(B0, M)

        Q = q_ref.l1_norm()
        b0_sup = B0.sup()
        # Σ_{n≥1} B_n 的包络：整体界在网格支撑节点上的上确界减去 B_0 本身
        support = K_ref.support_mask()
        xs = np.broadcast_to(K_ref.x_nodes[:, None], support.shape)[support]
        ts = np.broadcast_to(K_ref.t_nodes[None, :], support.shape)[support]
        envelope = np.asarray(bounds.lemma52_envelope(xs, ts, b0_sup, 0.0, max(R, math.e), Q))
        correction = float(np.max(envelope)) - b0_sup
        diagnostics: Dict[str, Any] = {
            'R': R, 'eps': float(zs_tilde.eps), 'p': p, 'h': h, 'Z': Z,
            'nu': bounds.nu_exponent(p), 'gamma': bounds.gamma_exponent(p),
            'c0': D.c0, 'warnings': list(D.warnings),
            'target_mode': target_mode, 'calibration_degree': degree,
            'n_zeros': zs_tilde.total_multiplicity,
            'B0_sup': b0_sup,
            'correction_envelope': correction,
        }
        if zs_tilde.eps < bounds.MAX_EPS:
            diagnostics['bound_shape'] = float(bounds.theorem61_envelope(R, zs_tilde.eps, p))

        if refine:
            est, info = self._refine(B0, q_ref, est, h)
            diagnostics.update(info)

        x = np.arange(M + 1) * h
        estimate = NodalFunction(x, est)
        diagnostics['sup_norm'] = estimate.sup()
        truth_fn = None
        if truth is not None:
            truth_fn = NodalFunction(x, np.asarray(truth.subtract(q_ref).tail_integral(x), dtype=complex))
            diagnostics['sup_error'] = float(np.max(np.abs(est - truth_fn.values)))
        return ReconstructionResult(estimate, diagnostics, truth_fn)


def write_reconstruction_csv(result: ReconstructionResult, path) -> None:
    """
    写出重构结果 CSV

    头部为 `# key=value` 参数行，随后是 x, est_re, est_im[, truth_re, truth_im] 列。
    """
    frame = pd.DataFrame({
        'x': result.x,
        'est_re': result.estimate.values.real,
        'est_im': result.estimate.values.imag,
    })
    if result.truth is not None:
        frame['truth_re'] = result.truth.values.real
        frame['truth_im'] = result.truth.values.imag
    keys = ('R', 'eps', 'p', 'h', 'Z', 'target_mode', 'calibration_degree')
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        for key in keys:
            if key in result.diagnostics:
                f.write(f"# {key}={result.diagnostics[key]!r}\n")
        frame.to_csv(f, index=False, lineterminator='\n')


@lru_cache(maxsize=1)
def default_reconstructor() -> Reconstructor:
    return Reconstructor()


def fourier_invert_diff(df: Callable, Z: float, t_grid) -> BoundaryKernelDiff:
    return default_reconstructor().fourier_invert_diff(df, Z, t_grid)


def band_split_diff(df: Callable, Rband: float, t_grid, p: Optional[float] = None):
    return default_reconstructor().band_split_diff(df, Rband, t_grid, p)


def reconstruct_from_zeros(zs_tilde: ZeroSet, q_ref: Potential, p: Optional[float] = None,
                           h: Optional[float] = None, **options) -> ReconstructionResult:
    return default_reconstructor().reconstruct_from_zeros(zs_tilde, q_ref, p, h, **options)
