"""
三角核网格模型
Triangular Kernel Grid Model

变换算子核 K / L / B 在三角形 {0 ≤ x ≤ t ≤ 2−x} 上的均匀网格采样，
以及网格文本格式的读写。
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict

import numpy as np

from ..utils.exceptions import ConfigError, MeshMismatchError


class KernelKind(Enum):
    """核类型"""
    K = "K"   # 0 → q 或 q1 → q2 的变换核
    L = "L"   # q → 0 的逆变换核
    B = "B"   # q → q̃ 的变换核


def mesh_size(h: float) -> int:
    """
    由步长求网格数 M = 1/h

    Args:
        h: 网格步长，须为 1/2^k

    Returns:
        M
    """
    if not (h > 0):
        raise ValueError(f"网格步长 h={h} 必须为正")
    M = int(round(1.0 / h))
    if M < 1 or abs(M * h - 1.0) > 1e-12 or (M & (M - 1)) != 0:
        raise ValueError(f"网格步长 h={h} 须为 1/2^k")
    return M


@dataclass
class TriangularKernelGrid:
    """
    三角核网格

    values[i, j] 对应节点 (x_i, t_j) = (i·h, j·h)，i = 0..M，j = 0..2M；
    三角形外（j < i）以及 x + t ≥ 2 的元素恒为 0。
    """

    h: float
    values: np.ndarray
    kind: KernelKind
    meta: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        M = mesh_size(self.h)
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != (M + 1, 2 * M + 1):
            raise ValueError(f"网格形状 {self.values.shape} 与步长 h={self.h} 不符")
        if isinstance(self.kind, str):
            self.kind = KernelKind(self.kind)
        self.values[~self.support_mask()] = 0.0

    @classmethod
    def zeros(cls, h: float, kind: KernelKind, meta: Dict = None) -> "TriangularKernelGrid":
        M = mesh_size(h)
        return cls(h, np.zeros((M + 1, 2 * M + 1), dtype=complex), kind, meta or {})

    @property
    def M(self) -> int:
        return self.values.shape[0] - 1

    @property
    def x_nodes(self) -> np.ndarray:
        return np.arange(self.M + 1) * self.h

    @property
    def t_nodes(self) -> np.ndarray:
        return np.arange(2 * self.M + 1) * self.h

    def triangle_mask(self) -> np.ndarray:
        """i ≤ j ≤ 2M − i 的节点"""
        M = self.values.shape[0] - 1
        i = np.arange(M + 1)[:, None]
        j = np.arange(2 * M + 1)[None, :]
        return (j >= i) & (i + j <= 2 * M)

    def support_mask(self) -> np.ndarray:
        """x + t < 2 的内部节点"""
        M = self.M
        i = np.arange(M + 1)[:, None]
        j = np.arange(2 * M + 1)[None, :]
        return (j >= i) & (i + j < 2 * M)

    def sup(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0

    def boundary_row(self) -> np.ndarray:
        """x = 0 行，即 t ↦ values(0, t)"""
        return self.values[0].copy()

    def diagonal_values(self) -> np.ndarray:
        idx = np.arange(self.M + 1)
        return self.values[idx, idx].copy()

    def vanishes_outside_support(self) -> bool:
        outside = self.triangle_mask() & ~self.support_mask()
        return bool(np.all(self.values[outside] == 0))

    def check_mesh(self, other: "TriangularKernelGrid"):
        if self.values.shape != other.values.shape or abs(self.h - other.h) > 1e-15:
            raise MeshMismatchError(f"网格步长不一致: h={self.h} vs h={other.h}")

    def with_values(self, values: np.ndarray, kind: KernelKind = None, **meta) -> "TriangularKernelGrid":
        merged = dict(self.meta)
        merged.update(meta)
        return TriangularKernelGrid(self.h, values, kind or self.kind, merged)


@dataclass(frozen=True)
class NodalFunction:
    """节点值 + 分段线性插值的复值函数"""

    nodes: np.ndarray
    values: np.ndarray

    def __call__(self, x):
        xa = np.asarray(x, dtype=float)
        vals = np.asarray(self.values, dtype=complex)
        out = np.interp(xa, self.nodes, vals.real) + 1j * np.interp(xa, self.nodes, vals.imag)
        return complex(out) if np.ndim(out) == 0 else out

    def sup(self) -> float:
        return float(np.max(np.abs(self.values))) if len(self.values) else 0.0


def diagonal(grid: TriangularKernelGrid) -> NodalFunction:
    """沿 t = x 的取值，节点间线性插值"""
    return NodalFunction(grid.x_nodes, grid.diagonal_values())


def format_grid(grid: TriangularKernelGrid) -> str:
    """网格文本：头部 + x+t<2 节点的 `x t re im` 行"""
    lines = [f"# kernelgrid kind={grid.kind.value} h={float(grid.h)!r}"]
    mask = grid.support_mask()
    for i, j in zip(*np.nonzero(mask)):
        v = grid.values[i, j]
        lines.append(f"{float(i * grid.h)!r} {float(j * grid.h)!r} {float(v.real)!r} {float(v.imag)!r}")
    return "\n".join(lines) + "\n"


def parse_grid(text: str) -> TriangularKernelGrid:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("# kernelgrid"):
        raise ConfigError("核网格文件缺少 '# kernelgrid' 头部")
    header = dict(tok.split("=", 1) for tok in lines[0].split()[2:])
    try:
        h = float(header["h"])
        kind = KernelKind(header["kind"])
    except (KeyError, ValueError) as e:
        raise ConfigError(f"核网格头部格式错误: {e}")
    grid = TriangularKernelGrid.zeros(h, kind)
    for raw in lines[1:]:
        parts = raw.split()
        if not parts or parts[0].startswith("#"):
            continue
        x, t, re, im = (float(p) for p in parts)
        i, j = int(round(x / h)), int(round(t / h))
        grid.values[i, j] = complex(re, im)
    return grid


def dump_grid(grid: TriangularKernelGrid, path) -> None:
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        f.write(format_grid(grid))


def load_grid(path) -> TriangularKernelGrid:
    try:
        with open(path, 'r', encoding='utf-8') as f:
            return parse_grid(f.read())
    except OSError as e:
        raise ConfigError(f"无法读取核网格文件 {path}: {e}")
