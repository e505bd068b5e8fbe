"""
resolab 测试包
Resolab Tests Package

包含所有的测试脚本和测试工具
"""

# 测试包版本
__version__ = "0.1.0"

# 导出主要测试类和函数
from .test_potential import TestPotential, run_tests
from .test_jost import TestJost
from .test_zeros import TestZeros

__all__ = [
    'TestPotential',
    'TestJost',
    'TestZeros',
    'run_tests'
]
