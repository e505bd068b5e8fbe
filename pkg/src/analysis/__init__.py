"""
分析模块
Analysis Module

Hadamard 分解、尾积分重构、包络求值与稳定性扫描
"""

from .factorization import FactorizedJost, normalize
from .reconstruction import Reconstructor, ReconstructionResult
from .stability_analyzer import StabilityAnalyzer, StabilityReport

__all__ = ['FactorizedJost', 'normalize', 'Reconstructor', 'ReconstructionResult',
           'StabilityAnalyzer', 'StabilityReport']
