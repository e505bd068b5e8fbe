"""
模型模块
Models Module

势函数、零点集合与三角变换核网格
"""

from .kernel_grid import KernelKind, TriangularKernelGrid
from .potential import Potential
from .zero_set import Zero, ZeroSet

__all__ = ['KernelKind', 'TriangularKernelGrid', 'Potential', 'Zero', 'ZeroSet']
