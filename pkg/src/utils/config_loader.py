"""
配置加载器
Configuration Loader

读取 config/system_config.yaml，缺失或出错时回退到内置默认配置
"""

import copy
import math
import os
from functools import lru_cache
from typing import Any, Dict, Optional

import yaml


def get_project_root() -> str:
    """项目根目录"""
    return os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))


def get_default_config_path() -> str:
    return os.path.join(get_project_root(), 'config', 'system_config.yaml')


def _get_default_config() -> Dict[str, Any]:
    """获取默认系统配置"""
    return {
        'jost': {
            'method': 'DOP853',
            'rtol': 1e-11,
            'atol': 1e-13,
            'taylor_threshold': 1e-4,
        },
        'zeros': {
            'min_edge_points': 16,
            'points_per_unit': 4.0,
            'max_phase_step': math.pi / 4,
            'max_log_ratio': 1.0,
            'near_zero_ratio': 1e-8,
            'contour_retries': 3,
            'radius_nudge': 1e-6,
            'newton_box_size': 1.0,
            'newton_max_iter': 50,
            'max_depth': 60,
            'cluster_diameter': 1e-6,
            'min_imag_gap': 1e-3,
            'max_contour_points': 2000000,
        },
        'kernels': {
            'h': 1.0 / 64,
            'tol': 1e-12,
            'max_terms': 60,
        },
        'reconstruction': {
            'p': 2.0,
            'panel_width': math.pi / 4,
            'panel_order': 16,
            'min_window': 20.0,
            'tail_ratio_limit': 3.0,
            'target_mode': 'reference',
            'calibration_degree': 3,
            'refine': False,
            'max_refine_iter': 5,
            'refine_tol': 1e-4,
            'h': 1.0 / 64,
            'window_exponent': 1.0 / 6.0,
        },
        'bounds': {
            'default_p': 2.0,
        },
        'logging': {
            'log_dir': 'logs',
            'log_file': 'resolab.log',
            'screen_level': 30,
            'file_level': 20,
        },
        'output': {
            'base_dir': 'outputs',
        },
    }


def _deep_merge(base: Dict, override: Dict) -> Dict:
    """递归合并，override 优先"""
    merged = copy.deepcopy(base)
    for key, value in (override or {}).items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


@lru_cache(maxsize=8)
def _load_cached(config_path: str) -> Dict[str, Any]:
    try:
        with open(config_path, 'r', encoding='utf-8') as f:
            loaded = yaml.safe_load(f) or {}
        return _deep_merge(_get_default_config(), loaded)
    except Exception as e:
        print(f"⚠ 加载系统配置失败: {e}，使用默认配置")
        return _get_default_config()


def load_system_config(config_path: Optional[str] = None) -> Dict[str, Any]:
    """
    加载系统配置

    Args:
        config_path: 配置文件路径（可选，默认 config/system_config.yaml）

    Returns:
        合并默认值后的配置字典（副本）
    """
    if config_path is None:
        config_path = get_default_config_path()
    return copy.deepcopy(_load_cached(os.path.abspath(config_path)))


def get_section(name: str, config_path: Optional[str] = None) -> Dict[str, Any]:
    """读取单个配置节"""
    return load_system_config(config_path).get(name, {})
