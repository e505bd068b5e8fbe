"""
工具模块
Utilities Module
"""
