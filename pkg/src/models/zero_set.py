"""
零点集合模型
Zero Set Model

Jost 函数零点（本征值与共振）的集合、分类、计数函数、扰动、配对与文件读写
"""

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from ..utils.exceptions import PairingError, ZeroFileError

# 实轴零点判定的相对容差
REAL_AXIS_TOL = 1e-12


class ZeroKind(Enum):
    """零点类型"""
    EIGENVALUE = "eigenvalue"    # Im z > 0
    RESONANCE = "resonance"      # Im z < 0
    REAL_AXIS = "real-axis"      # 数值上落在实轴，计入共振


def classify(z: complex, tol: float = REAL_AXIS_TOL) -> ZeroKind:
    if abs(z.imag) <= tol * max(1.0, abs(z)):
        return ZeroKind.REAL_AXIS
    return ZeroKind.EIGENVALUE if z.imag > 0 else ZeroKind.RESONANCE


@dataclass(frozen=True)
class Zero:
    """单个零点"""

    z: complex
    multiplicity: int = 1

    @property
    def kind(self) -> ZeroKind:
        return classify(self.z)

    @property
    def is_eigenvalue(self) -> bool:
        return self.kind is ZeroKind.EIGENVALUE

    @property
    def is_resonance(self) -> bool:
        return self.kind is not ZeroKind.EIGENVALUE


@dataclass(frozen=True)
class ZeroSet:
    """
    圆盘 |z − center| < R 内的零点集合

    zeros 按 (Re, Im) 排序；residual 为所列零点处的最大 |ψ|；
    eps 记录生成该集合时所用的扰动水平。
    """

    zeros: Tuple[Zero, ...]
    R: float
    residual: float = 0.0
    center: complex = 0j
    eps: float = 0.0

    def __post_init__(self):
        ordered = tuple(sorted(self.zeros, key=lambda zr: (zr.z.real, zr.z.imag)))
        object.__setattr__(self, 'zeros', ordered)
        object.__setattr__(self, 'center', complex(self.center))

    @classmethod
    def empty(cls, R: float, center: complex = 0j) -> "ZeroSet":
        return cls((), float(R), 0.0, center)

    @classmethod
    def from_values(cls, values: Sequence[complex], R: float, center: complex = 0j,
                    multiplicities: Optional[Sequence[int]] = None, residual: float = 0.0) -> "ZeroSet":
        mult = multiplicities or [1] * len(values)
        return cls(tuple(Zero(complex(v), int(m)) for v, m in zip(values, mult)), float(R), residual, center)

    def __len__(self) -> int:
        return len(self.zeros)

    def __iter__(self):
        return iter(self.zeros)

    @property
    def values(self) -> np.ndarray:
        return np.array([zr.z for zr in self.zeros], dtype=complex)

    @property
    def multiplicities(self) -> np.ndarray:
        return np.array([zr.multiplicity for zr in self.zeros], dtype=int)

    @property
    def total_multiplicity(self) -> int:
        return int(sum(zr.multiplicity for zr in self.zeros))

    def eigenvalues(self) -> List[Zero]:
        return [zr for zr in self.zeros if zr.is_eigenvalue]

    def resonances(self) -> List[Zero]:
        return [zr for zr in self.zeros if zr.is_resonance]

    def multiplicity_at_origin(self, tol: float = 1e-12) -> int:
        return int(sum(zr.multiplicity for zr in self.zeros if abs(zr.z) <= tol))

    def without_origin(self, tol: float = 1e-12) -> "ZeroSet":
        return replace(self, zeros=tuple(zr for zr in self.zeros if abs(zr.z) > tol))

    def within(self, radius: float, center: Optional[complex] = None) -> "ZeroSet":
        """截取 |z − center| < radius 的子集"""
        c = self.center if center is None else complex(center)
        kept = tuple(zr for zr in self.zeros if abs(zr.z - c) < radius)
        return replace(self, zeros=kept, R=float(radius), center=c)

    def is_contained(self) -> bool:
        return all(abs(zr.z - self.center) < self.R for zr in self.zeros)

    def min_imag_gap(self) -> float:
        if not self.zeros:
            return math.inf
        return float(np.min(np.abs(self.values.imag)))


def counting_function(zs: ZeroSet, center: complex, radii: Sequence[float]) -> List[int]:
    """
    计数函数 N(r)：|z − center| < r 内零点的重数和

    Args:
        zs: 零点集合
        center: 圆心
        radii: 升序半径列表

    Returns:
        各半径对应的计数（单调不减）
    """
    radii = [float(r) for r in radii]
    if any(b < a for a, b in zip(radii, radii[1:])):
        raise ValueError("半径列表必须升序")
    if not zs.zeros:
        return [0] * len(radii)
    dist = np.abs(zs.values - complex(center))
    mult = zs.multiplicities
    return [int(np.sum(mult[dist < r])) for r in radii]


def perturb_zeros(zs: ZeroSet, eps: float, seed: int, min_imag_gap: float = 1e-3) -> ZeroSet:
    """
    以半径 eps 的圆盘均匀分布独立扰动每个零点

    同一 seed 下每个零点的抽样 (U, V) 与 eps 无关，位移 r = eps·√U，
    方向 θ = 2πV。位移后距实轴不足 min_imag_gap 的零点关于 Im = ±min_imag_gap
    反射，保持在原来的半平面内；反射后位移超过 eps 时沿位移方向缩回到 eps。

    Args:
        zs: 原零点集合
        eps: 扰动半径 (≥ 0)
        seed: 随机种子
        min_imag_gap: 与实轴的最小距离

    Returns:
        扰动后的零点集合（顺序重新按 (Re, Im) 排列）
    """
    if eps < 0:
        raise ValueError(f"扰动水平 eps={eps} 不能为负")
    if eps == 0 or not zs.zeros:
        return replace(zs, eps=float(eps))

    rng = np.random.default_rng(seed)
    draws = rng.random((len(zs.zeros), 2))
    moved = []
    for zr, (u, v) in zip(zs.zeros, draws):
        w = zr.z + eps * math.sqrt(u) * complex(math.cos(2 * math.pi * v), math.sin(2 * math.pi * v))
        if zr.z.imag >= 0 and w.imag < min_imag_gap:
            w = complex(w.real, 2 * min_imag_gap - w.imag)
        elif zr.z.imag < 0 and w.imag > -min_imag_gap:
            w = complex(w.real, -2 * min_imag_gap - w.imag)
        step = w - zr.z
        if abs(step) > eps:
            w = zr.z + step * (eps / abs(step))
        moved.append(Zero(w, zr.multiplicity))
    return replace(zs, zeros=tuple(moved), eps=float(eps))


def match_zeros(a: ZeroSet, b: ZeroSet) -> Tuple[np.ndarray, np.ndarray]:
    """
    最小权匹配配对两个零点集合

    Args:
        a, b: 零点集合（总数须相同）

    Returns:
        (a_values, b_values) 按配对顺序排列的数组
    """
    av, bv = a.values, b.values
    if av.size != bv.size:
        raise PairingError(f"零点数目不一致: {av.size} vs {bv.size}")
    if av.size == 0:
        return av, bv
    cost = np.abs(av[:, None] - bv[None, :])
    rows, cols = linear_sum_assignment(cost)
    return av[rows], bv[cols]


# ---------------------------------------------------------------------------
# 文件读写
# ---------------------------------------------------------------------------

def format_zero_file(zs: ZeroSet) -> str:
    """零点文件文本，浮点数以最短可逆表示写出"""
    lines = [f"# zeroset R={zs.R!r} center={zs.center.real!r},{zs.center.imag!r}",
             f"# eps={zs.eps!r} residual={zs.residual!r}"]
    for zr in zs.zeros:
        lines.append(f"{zr.z.real!r} {zr.z.imag!r} {zr.multiplicity}")
    return "\n".join(lines) + "\n"


def parse_zero_file(text: str) -> ZeroSet:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("# zeroset"):
        raise ZeroFileError("零点文件缺少 '# zeroset' 头部")
    try:
        header = dict(tok.split("=", 1) for tok in lines[0].split()[2:])
        R = float(header["R"])
        c_re, c_im = header["center"].split(",")
        center = complex(float(c_re), float(c_im))
    except (KeyError, ValueError) as e:
        raise ZeroFileError(f"零点文件头部格式错误: {e}")

    eps, residual = 0.0, 0.0
    zeros = []
    for line_no, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            for tok in line[1:].split():
                key, _, value = tok.partition("=")
                if key == "eps":
                    eps = float(value)
                elif key == "residual":
                    residual = float(value)
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ZeroFileError(f"第 {line_no} 行格式错误: '{line}'")
        try:
            zeros.append(Zero(complex(float(parts[0]), float(parts[1])), int(parts[2])))
        except ValueError as e:
            raise ZeroFileError(f"第 {line_no} 行无法解析: {e}")
    return ZeroSet(tuple(zeros), R, residual, center, eps)


def write_zero_file(zs: ZeroSet, path) -> None:
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        f.write(format_zero_file(zs))


def read_zero_file(path) -> ZeroSet:
    try:
        with open(path, 'r', encoding='utf-8') as f:
            text = f.read()
    except OSError as e:
        raise ZeroFileError(f"无法读取零点文件 {path}: {e}")
    return parse_zero_file(text)
