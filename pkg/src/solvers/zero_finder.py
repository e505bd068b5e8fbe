"""
零点求解器
Zero Finder

基于辐角原理的 Jost 函数零点计数与定位：沿围道做自适应辐角延拓得到绕数，
对圆盘外接正方形递归四分，单零点方框用 Newton 迭代精化。
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from ..models.zero_set import Zero, ZeroSet
from ..utils.config_loader import get_section
from ..utils.exceptions import ContourError, SubdivisionDepthError, WindingError, ZeroCountError

log = logging.getLogger(__name__)

# 方框在相邻子框计数失败时依次尝试的分割比例
SPLIT_RATIOS = (0.5, 0.47, 0.53, 0.44, 0.56)

# 初始正方形相对圆盘半径的外扩量
SQUARE_MARGINS = (3e-3, 1.7e-2, 3.1e-2)


@dataclass(frozen=True)
class Box:
    """复平面上的轴对齐矩形 [x0, x1] × [y0, y1]"""

    x0: float
    x1: float
    y0: float
    y1: float

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    @property
    def diameter(self) -> float:
        return math.hypot(self.width, self.height)

    @property
    def center(self) -> complex:
        return complex(0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))

    def contains(self, z: complex) -> bool:
        return self.x0 <= z.real <= self.x1 and self.y0 <= z.imag <= self.y1

    def intersects_disc(self, center: complex, radius: float) -> bool:
        cx = min(max(center.real, self.x0), self.x1)
        cy = min(max(center.imag, self.y0), self.y1)
        return abs(complex(cx, cy) - center) < radius

    def split(self, ratio: float = 0.5) -> Tuple["Box", "Box", "Box", "Box"]:
        """按比例四分（左下、右下、左上、右上）"""
        xm = self.x0 + ratio * self.width
        ym = self.y0 + ratio * self.height
        return (Box(self.x0, xm, self.y0, ym), Box(xm, self.x1, self.y0, ym),
                Box(self.x0, xm, ym, self.y1), Box(xm, self.x1, ym, self.y1))


@dataclass
class ContourResult:
    """一次围道计数的结果"""

    count: int
    winding: float
    max_abs: float
    points: int


def _as_function(f) -> Callable[[np.ndarray], np.ndarray]:
    evaluate = getattr(f, 'evaluate', None)
    return evaluate if evaluate is not None else f


class ZeroFinder:
    """辐角原理零点求解器"""

    def __init__(self, config_path: Optional[str] = None):
        """
        初始化零点求解器

        Args:
            config_path: 系统配置文件路径
        """
        self.config = get_section('zeros', config_path)
        self.min_edge_points = int(self.config.get('min_edge_points', 16))
        self.points_per_unit = float(self.config.get('points_per_unit', 4.0))
        self.max_phase_step = float(self.config.get('max_phase_step', math.pi / 4))
        self.max_log_ratio = float(self.config.get('max_log_ratio', 1.0))
        self.near_zero_ratio = float(self.config.get('near_zero_ratio', 1e-8))
        self.contour_retries = int(self.config.get('contour_retries', 3))
        self.radius_nudge = float(self.config.get('radius_nudge', 1e-6))
        self.newton_box_size = float(self.config.get('newton_box_size', 1.0))
        self.newton_max_iter = int(self.config.get('newton_max_iter', 50))
        self.max_depth = int(self.config.get('max_depth', 60))
        self.cluster_diameter = float(self.config.get('cluster_diameter', 1e-6))
        self.max_contour_points = int(self.config.get('max_contour_points', 2000000))

    # ------------------------------------------------------------------
    # 围道绕数
    # ------------------------------------------------------------------

    def _winding(self, func, path: Callable[[np.ndarray], np.ndarray],
                 knots: Sequence[float], length: float) -> ContourResult:
        """
        沿闭合围道做辐角延拓

        path 把参数 s ∈ [0,1] 映射到围道点，knots 为必须采样的参数（如矩形顶点）。
        相邻采样点的相位变化超过 max_phase_step 或对数模长变化超过
        max_log_ratio 时插入中点，直至全部满足；所需步长小于
        near_zero_ratio·周长时判定围道过于靠近零点。
        """
        knots = np.asarray(sorted(set(knots) | {0.0, 1.0}), dtype=float)
        pieces = []
        for a, b in zip(knots[:-1], knots[1:]):
            n = max(self.min_edge_points, int(math.ceil((b - a) * length * self.points_per_unit)))
            pieces.append(np.linspace(a, b, n + 1)[:-1])
        s = np.concatenate(pieces)
        values = np.asarray(func(path(s)), dtype=complex)
        # 闭合：末点与起点相同
        s = np.append(s, 1.0)
        values = np.append(values, values[0])

        while True:
            if not np.all(np.isfinite(values)):
                raise ContourError("围道上出现非有限函数值")
            if np.any(values == 0):
                raise ContourError("围道经过零点")
            ratio = values[1:] / values[:-1]
            bad = (np.abs(np.angle(ratio)) > self.max_phase_step) | \
                  (np.abs(np.log(np.abs(ratio))) > self.max_log_ratio)
            if not np.any(bad):
                break
            gaps = (s[1:] - s[:-1])[bad]
            if np.min(gaps) < self.near_zero_ratio:
                raise ContourError(
                    f"围道过于靠近零点 (最小步长 {np.min(gaps) * length:.3e})"
                )
            if s.size > self.max_contour_points:
                raise ContourError(f"围道采样点超过上限 {self.max_contour_points}")
            mids = 0.5 * (s[:-1][bad] + s[1:][bad])
            new_values = np.asarray(func(path(mids)), dtype=complex)
            idx = np.nonzero(bad)[0] + 1
            s = np.insert(s, idx, mids)
            values = np.insert(values, idx, new_values)

        ratio = values[1:] / values[:-1]
        winding = float(np.sum(np.angle(ratio)) / (2 * math.pi))
        count = int(round(winding))
        if abs(winding - count) > 1e-3:
            raise WindingError(f"绕数非整数: {winding:.6f}")
        return ContourResult(count=count, winding=winding,
                             max_abs=float(np.max(np.abs(values))), points=s.size - 1)

    def count_in_circle(self, f, center: complex, r: float) -> ContourResult:
        """圆周 |z − center| = r 上的绕数（靠近零点时微调半径）"""
        if r <= 0:
            raise ValueError(f"半径 r={r} 必须为正")
        func = _as_function(f)
        center = complex(center)
        radius = float(r)
        last_error = None
        for attempt in range(self.contour_retries + 1):
            path = lambda s, rad=radius: center + rad * np.exp(2j * math.pi * s)
            try:
                return self._winding(func, path, (0.25, 0.5, 0.75), 2 * math.pi * radius)
            except ContourError as e:
                last_error = e
                log.warning("圆周 r=%.12g 计数失败 (%s)，微调半径重试", radius, e)
                radius *= 1.0 + self.radius_nudge
        raise ContourError(f"圆周计数在 {self.contour_retries} 次微调后仍失败: {last_error}")

    def count_in_box(self, f, box: Box) -> ContourResult:
        """矩形边界的绕数（逆时针）"""
        func = _as_function(f)
        w, h = box.width, box.height
        perimeter = 2 * (w + h)
        k1, k2, k3 = w / perimeter, (w + h) / perimeter, (2 * w + h) / perimeter

        def path(s):
            s = np.asarray(s, dtype=float)
            d = s * perimeter
            z = np.empty(s.shape, dtype=complex)
            e1 = s < k1
            e2 = (s >= k1) & (s < k2)
            e3 = (s >= k2) & (s < k3)
            e4 = s >= k3
            z[e1] = (box.x0 + d[e1]) + 1j * box.y0
            z[e2] = box.x1 + 1j * (box.y0 + d[e2] - w)
            z[e3] = (box.x1 - (d[e3] - w - h)) + 1j * box.y1
            z[e4] = box.x0 + 1j * (box.y1 - (d[e4] - 2 * w - h))
            return z

        return self._winding(func, path, (k1, k2, k3), perimeter)

    # ------------------------------------------------------------------
    # Newton 精化
    # ------------------------------------------------------------------

    @staticmethod
    def _value_and_derivative(f, z: complex) -> Tuple[complex, complex]:
        both = getattr(f, 'value_and_derivative', None)
        if both is not None:
            value, deriv = both(z)
            return complex(np.ravel(value)[0]), complex(np.ravel(deriv)[0])
        return complex(f.evaluate(z)), complex(f.derivative(z))

    def newton_polish(self, f, z0: complex, tol: float, scale: float,
                      box: Optional[Box] = None) -> Tuple[Optional[complex], List[float]]:
        """
        Newton 迭代精化单零点

        Args:
            f: Jost 模型（需提供 derivative）
            z0: 初值
            tol: 相对容差
            scale: 模长尺度（围道最大 |f|）
            box: 限定区域（迭代离开时视为失败）

        Returns:
            (零点或 None, 各步 |f| 历史)
        """
        z = complex(z0)
        target = tol * (1.0 + scale)
        history = []
        for _ in range(self.newton_max_iter):
            value, deriv = self._value_and_derivative(f, z)
            history.append(abs(value))
            if abs(value) <= target:
                if box is None or box.contains(z):
                    return z, history
                return None, history
            if deriv == 0 or not np.isfinite(deriv):
                return None, history
            z = z - value / deriv
            if not (math.isfinite(z.real) and math.isfinite(z.imag)):
                return None, history
            if box is not None and abs(z - box.center) > 2 * box.diameter:
                return None, history
        return None, history

    # ------------------------------------------------------------------
    # 四分细分
    # ------------------------------------------------------------------

    def _split_counts(self, f, box: Box, parent_count: int, center: complex, R: float):
        """按候选比例四分并计数子框，返回 [(子框, 计数结果)]"""
        last_error = None
        for ratio in SPLIT_RATIOS:
            children = [c for c in box.split(ratio)]
            try:
                results = []
                for child in children:
                    if child.intersects_disc(center, R):
                        results.append((child, self.count_in_box(f, child)))
                    else:
                        results.append((child, None))
            except ContourError as e:
                last_error = e
                log.info("分割比例 %.2f 的子框边界靠近零点，换用其他比例", ratio)
                continue
            if all(res is not None for _, res in results):
                total = sum(res.count for _, res in results)
                if total != parent_count:
                    last_error = WindingError(f"子框计数 {total} 与父框 {parent_count} 不一致")
                    log.info("分割比例 %.2f 的计数不可加，换用其他比例", ratio)
                    continue
            return [(c, res) for c, res in results if res is not None]
        raise ContourError(f"方框 {box} 无法找到可用分割: {last_error}")

    def find_zeros(self, f, R: float, tol: float = 1e-10, center: complex = 0j) -> ZeroSet:
        """
        求圆盘 |z − center| < R 内全部零点

        Args:
            f: Jost 模型（evaluate / derivative）
            R: 圆盘半径 (≥ 1)
            tol: Newton 相对容差 (≥ 1e-12)
            center: 圆心

        Returns:
            零点集合
        """
        if R < 1:
            raise ValueError(f"圆盘半径 R={R} 须不小于 1")
        if tol < 1e-12:
            raise ValueError(f"容差 tol={tol} 须不小于 1e-12")
        center = complex(center)
        disc_total = self.count_in_circle(f, center, R).count
        log.info("圆盘 |z-(%s)|<%g 内零点总数 %d", center, R, disc_total)
        if disc_total == 0:
            return ZeroSet.empty(R, center)

        root = None
        for margin in SQUARE_MARGINS:
            half = R * (1.0 + margin)
            box = Box(center.real - half, center.real + half, center.imag - half, center.imag + half)
            try:
                root = (box, self.count_in_box(f, box))
                break
            except ContourError as e:
                log.info("外接正方形靠近零点 (%s)，扩大后重试", e)
        if root is None:
            raise ContourError("外接正方形计数失败")

        found: List[Tuple[complex, int]] = []
        stack = [(root[0], root[1], 0)]
        while stack:
            box, res, depth = stack.pop()
            if res.count == 0 or not box.intersects_disc(center, R):
                continue
            if res.count == 1 and max(box.width, box.height) <= self.newton_box_size:
                z, _ = self.newton_polish(f, box.center, tol, res.max_abs, box)
                if z is not None:
                    found.append((z, 1))
                    continue
            if box.diameter < self.cluster_diameter:
                found.append((box.center, res.count))
                continue
            if depth >= self.max_depth:
                raise SubdivisionDepthError(f"细分深度超过 {self.max_depth}（方框 {box}）")
            for child, child_res in reversed(self._split_counts(f, box, res.count, center, R)):
                stack.append((child, child_res, depth + 1))

        zeros = []
        residual = 0.0
        func = _as_function(f)
        for z, mult in found:
            if abs(z - center) >= R:
                continue
            zeros.append(Zero(z, mult))
            residual = max(residual, float(abs(complex(np.ravel(func(np.array([z])))[0]))))
        result = ZeroSet(tuple(zeros), float(R), residual, center)
        if result.total_multiplicity != disc_total:
            log.error("定位到的零点重数和 %d 与圆周计数 %d 不一致",
                      result.total_multiplicity, disc_total)
            raise ZeroCountError(result.total_multiplicity, disc_total)
        return result


_default_finder: Optional[ZeroFinder] = None


def default_finder() -> ZeroFinder:
    global _default_finder
    if _default_finder is None:
        _default_finder = ZeroFinder()
    return _default_finder


def count_zeros(f, center: complex, r: float) -> int:
    return default_finder().count_in_circle(f, center, r).count


def count_zeros_in_box(f, box: Box) -> int:
    return default_finder().count_in_box(f, box).count


def find_zeros(f, R: float, tol: float = 1e-10, center: complex = 0j) -> ZeroSet:
    return default_finder().find_zeros(f, R, tol, center)


def resonance_asymptote(x, b: float, jump: float):
    """
    共振渐近曲线 y = −(1/2b)·log(4x²/|jump|)

    b 为势函数最后一个跳跃点，jump 为该处跳跃幅度；仅作诊断用途。
    """
    x = np.asarray(x, dtype=float)
    with np.errstate(divide='ignore'):
        return -np.log(4.0 * x * x / abs(jump)) / (2.0 * b)
