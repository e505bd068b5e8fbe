"""
共振数据反演实验室
Resonance Inverse Problem Laboratory

半直线紧支撑势函数的 Jost 函数、零点（本征值与共振）、变换核，
以及由圆盘内零点重构势函数尾积分的稳定性实验框架
"""

__version__ = "0.1.0"
__description__ = "Stability laboratory for recovering compactly supported potentials from resonances"
