"""
数据模块
Data Module

固定势函数与阶梯势闭式 Jost 函数
"""

from .potential_library import StepJost, get_fixture, step_potential

__all__ = ['StepJost', 'get_fixture', 'step_potential']
