"""
实验模块
Experiments Module

命令行各子命令的实验编排
"""

from .harness import SweepConfig, load_sweep_config

__all__ = ['SweepConfig', 'load_sweep_config']
