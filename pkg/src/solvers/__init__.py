"""
求解器模块
Solvers Module

Jost 函数正问题、辐角原理零点求解与变换核积分方程
"""

from .jost_solver import ForwardJost, JostSolver
from .kernel_solver import KernelSolver
from .zero_finder import ZeroFinder

__all__ = ['ForwardJost', 'JostSolver', 'KernelSolver', 'ZeroFinder']
