"""
实验编排
Experiment Harness

读取实验配置（YAML 的 experiment 节，pydantic 校验），驱动正问题、零点、核、
重构、稳定性扫描与包络求值各命令，并把结果写入会话目录。
"""

import logging
import math
import os
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd
import yaml
from oemof.tools import logger
from pydantic import BaseModel, ConfigDict, ValidationError, field_validator, model_validator

from ..analysis import bounds
from ..analysis.factorization import CALIBRATION_DEGREES
from ..analysis.reconstruction import Reconstructor, write_reconstruction_csv
from ..analysis.stability_analyzer import StabilityAnalyzer, StabilityReport
from ..data.potential_library import get_fixture
from ..models.kernel_grid import diagonal, format_grid, mesh_size
from ..models.potential import Potential, load_potential
from ..models.zero_set import counting_function, format_zero_file, perturb_zeros, read_zero_file
from ..solvers.jost_solver import ForwardJost, JostSolver
from ..solvers.kernel_solver import KernelSolver
from ..solvers.zero_finder import ZeroFinder
from ..utils.config_loader import get_project_root, get_section
from ..utils.exceptions import ConfigError
from ..utils.file_manager import ExperimentFileManager, SessionContext

log = logging.getLogger(__name__)


class SweepConfig(BaseModel):
    """实验配置"""

    model_config = ConfigDict(extra='forbid')

    potential_ref: Optional[str] = None     # .pot 路径或内置名称，缺省为 q ≡ 0
    potential_true: Optional[str] = None
    R_list: List[float] = []
    eps_list: List[float] = [0.0]
    p: float = 2.0
    h: float = 1.0 / 64
    seed: int = 0
    out_dir: str = 'outputs'
    zero_file: Optional[str] = None
    zero_tol: float = 1e-10
    target_mode: Optional[str] = None
    calibration_degree: Optional[int] = None
    refine: Optional[bool] = None
    system_config: Optional[str] = None
    base_dir: str = '.'

    @field_validator('R_list')
    @classmethod
    def _ascending(cls, value: List[float]) -> List[float]:
        if any(b <= a for a, b in zip(value, value[1:])):
            raise ValueError(f"R_list 须严格递增: {value}")
        if any(R < 1 for R in value):
            raise ValueError(f"R_list 中的半径须不小于 1: {value}")
        return value

    @field_validator('eps_list')
    @classmethod
    def _eps_range(cls, value: List[float]) -> List[float]:
        bad = [e for e in value if not (0.0 <= e < bounds.MAX_EPS)]
        if bad:
            raise ValueError(f"eps 须在 [0, {bounds.MAX_EPS}) 内: {bad}")
        return value

    @field_validator('p')
    @classmethod
    def _p_range(cls, value: float) -> float:
        if not (1.0 < value <= 2.0):
            raise ValueError(f"p={value} 须在 (1, 2] 内")
        return value

    @field_validator('h')
    @classmethod
    def _dyadic(cls, value: float) -> float:
        mesh_size(value)
        return value

    @model_validator(mode='after')
    def _modes(self) -> "SweepConfig":
        if self.target_mode not in (None, 'unit', 'reference'):
            raise ValueError(f"未知标定目标模式: {self.target_mode}")
        if self.calibration_degree not in (None,) + CALIBRATION_DEGREES:
            raise ValueError(f"标定次数须在 {CALIBRATION_DEGREES} 内: {self.calibration_degree}")
        return self

    def resolve_path(self, path: str) -> str:
        return path if os.path.isabs(path) else os.path.join(self.base_dir, path)

    @property
    def R_max(self) -> float:
        if not self.R_list:
            raise ConfigError("R_list 为空")
        return self.R_list[-1]

    def reconstruction_options(self) -> Dict[str, Any]:
        options = {'target_mode': self.target_mode, 'calibration_degree': self.calibration_degree,
                   'refine': self.refine}
        return {k: v for k, v in options.items() if v is not None}

    def echo(self) -> Dict[str, Any]:
        """写入清单的配置回显（不含路径基准）"""
        return self.model_dump(exclude={'base_dir'})


def load_sweep_config(config_path: str, out_dir: Optional[str] = None) -> SweepConfig:
    """
    读取实验配置

    Args:
        config_path: YAML 文件路径（读取 experiment 节）
        out_dir: 覆盖输出目录（可选）

    Returns:
        SweepConfig
    """
    try:
        with open(config_path, 'r', encoding='utf-8') as f:
            loaded = yaml.safe_load(f) or {}
    except OSError as e:
        raise ConfigError(f"无法读取实验配置 {config_path}: {e}")
    except yaml.YAMLError as e:
        raise ConfigError(f"实验配置不是合法 YAML: {e}")

    section = loaded.get('experiment', loaded) if isinstance(loaded, dict) else None
    if not isinstance(section, dict):
        raise ConfigError("实验配置缺少 experiment 节")
    section = dict(section)
    section.setdefault('base_dir', os.path.dirname(os.path.abspath(config_path)))
    if out_dir is not None:
        section['out_dir'] = out_dir
    try:
        config = SweepConfig(**section)
    except ValidationError as e:
        raise ConfigError(f"实验配置校验失败: {e}")
    if config.system_config is not None:
        config.system_config = config.resolve_path(config.system_config)
    return config


def resolve_potential(ref: Optional[str], config: SweepConfig) -> Potential:
    """路径或内置名称 → Potential；None 为 q ≡ 0"""
    if ref is None:
        return Potential.zero()
    candidates = [config.resolve_path(ref), os.path.join(get_project_root(), ref)]
    for path in candidates:
        if os.path.isfile(path):
            return load_potential(path)
    try:
        return get_fixture(ref)
    except KeyError:
        raise ConfigError(f"找不到势函数: {ref}")


def setup_logging(config_path: Optional[str] = None) -> str:
    """按 logging 配置节初始化 oemof 日志，返回日志目录"""
    cfg = get_section('logging', config_path)
    log_dir = cfg.get('log_dir', 'logs')
    if not os.path.isabs(log_dir):
        log_dir = os.path.join(get_project_root(), log_dir)
    os.makedirs(log_dir, exist_ok=True)
    logger.define_logging(
        logpath=log_dir,
        logfile=cfg.get('log_file', 'resolab.log'),
        screen_level=int(cfg.get('screen_level', 30)),
        file_level=int(cfg.get('file_level', 20)),
    )
    return log_dir


def _file_manager(config: SweepConfig) -> ExperimentFileManager:
    return ExperimentFileManager(config.resolve_path(config.out_dir))


def _true_potential(config: SweepConfig) -> Potential:
    if config.potential_true is None:
        raise ConfigError("未配置 potential_true")
    return resolve_potential(config.potential_true, config)


# ---------------------------------------------------------------------------
# 命令
# ---------------------------------------------------------------------------

def cmd_forward(config: SweepConfig) -> Dict[str, Any]:
    """
    正问题：potential_true 在 |z| < max(R_list) 内的零点，写出零点文件与 Jost 解剖面

    Returns:
        {'zeros': ZeroSet, 'files': [路径]}
    """
    print("\n🔸 正问题: 求 Jost 函数零点")
    print("-" * 40)
    q_true = _true_potential(config)
    R = config.R_max
    solver = JostSolver(config.system_config)
    model = ForwardJost(q_true, solver)
    zeros = ZeroFinder(config.system_config).find_zeros(model, R, config.zero_tol)
    print(f"✓ 圆盘 |z| < {R:g} 内零点 {zeros.total_multiplicity} 个"
          f"（本征值 {len(zeros.eigenvalues())}，共振 {len(zeros.resonances())}）")

    xs = np.linspace(0.0, 1.0, 101)
    profile = solver.profile(q_true, 1.0, xs)
    frame = pd.DataFrame({'x': xs, 'psi_re': profile.real, 'psi_im': profile.imag})

    with SessionContext(_file_manager(config), 'forward', config.echo()) as session:
        session.save_file('zeros', 'zeros.txt', format_zero_file(zeros))
        session.save_file('reports', 'jost_profile.csv', frame)
    return {'zeros': zeros, 'files': session.saved}


def cmd_zeros(config: SweepConfig) -> Dict[str, Any]:
    """
    零点与计数函数：以 3iρ（ρ = 2κ(Q)）为圆心求零点，
    输出计数函数 N(r) 及其 Jensen 上界

    Returns:
        {'zeros': ZeroSet, 'counting': DataFrame, 'files': [路径]}
    """
    print("\n🔸 零点计数与 Jensen 上界")
    print("-" * 40)
    q_true = _true_potential(config)
    R = config.R_max
    kappa_value = bounds.kappa(q_true.l1_norm())
    rho = 2.0 * kappa_value
    center = 3j * rho
    model = ForwardJost(q_true, JostSolver(config.system_config))
    zeros = ZeroFinder(config.system_config).find_zeros(model, R, config.zero_tol, center)

    radii = np.linspace(0.0, R, 41)[1:-1]
    counts = counting_function(zeros, center, radii)
    jensen = np.asarray(bounds.jensen_bound(rho, kappa_value, radii), dtype=float)
    frame = pd.DataFrame({'r': radii, 'N': counts, 'jensen_bound': jensen,
                          'within_bound': np.asarray(counts) <= jensen})
    if not frame['within_bound'].all():
        print("⚠ 计数函数超过 Jensen 上界")
    else:
        print(f"✓ {len(radii)} 个半径上计数函数均不超过 Jensen 上界")

    with SessionContext(_file_manager(config), 'zeros', config.echo()) as session:
        session.save_file('zeros', 'zeros_centered.txt', format_zero_file(zeros))
        session.save_file('zeros', 'counting_function.csv', frame)
    return {'zeros': zeros, 'counting': frame, 'files': session.saved}


def cmd_kernels(config: SweepConfig) -> Dict[str, Any]:
    """
    变换核：K_ref (0 → q_ref)、K̃ (0 → q_true)、L (q_ref → 0) 与复合核 B

    Returns:
        {'diagnostics': dict, 'files': [路径]}
    """
    print("\n🔸 变换核计算")
    print("-" * 40)
    q_ref = resolve_potential(config.potential_ref, config)
    q_true = _true_potential(config)
    solver = KernelSolver(config.system_config)
    zero = Potential.zero()
    K_ref = solver.k_kernel(zero, q_ref, config.h)
    K_tilde = solver.k_kernel(zero, q_true, config.h)
    L = solver.l_kernel(K_ref)
    B = solver.compose_B(K_tilde, L)

    x = K_tilde.x_nodes
    diag_error = float(np.max(np.abs(diagonal(K_tilde).values - 0.5 * np.asarray(q_true.tail_integral(x)))))
    diagnostics = {
        'h': config.h,
        'K_ref_terms': K_ref.meta.get('terms'),
        'K_tilde_terms': K_tilde.meta.get('terms'),
        'K_tilde_sup': K_tilde.sup(),
        'B_sup': B.sup(),
        'diagonal_error': diag_error,
        'composition_residual': solver.composition_residual(K_ref, L),
        'support_vanishing': bool(K_tilde.vanishes_outside_support() and B.vanishes_outside_support()),
    }
    print(f"✓ 对角恒等式误差 {diag_error:.3e}，复合残差 {diagnostics['composition_residual']:.3e}")

    with SessionContext(_file_manager(config), 'kernels', config.echo()) as session:
        for name, grid in (('K_ref', K_ref), ('K_tilde', K_tilde), ('L_ref', L), ('B', B)):
            session.save_file('kernels', f"{name}.txt", format_grid(grid))
        session.save_file('reports', 'kernel_diagnostics.json', diagnostics)
    return {'diagnostics': diagnostics, 'files': session.saved}


def default_zero_file(config: SweepConfig) -> str:
    return os.path.join(config.resolve_path(config.out_dir), 'forward', 'zeros', 'zeros.txt')


def cmd_reconstruct(config: SweepConfig) -> Dict[str, Any]:
    """
    由零点文件重构 ∫_x^1 (q̃ − q_ref)

    零点先按 eps_list[0] 与 seed 扰动，与扫描中对应单元一致。

    Returns:
        {'result': ReconstructionResult, 'files': [路径]}
    """
    print("\n🔸 由零点重构尾积分")
    print("-" * 40)
    path = config.resolve_path(config.zero_file) if config.zero_file else default_zero_file(config)
    if not os.path.isfile(path):
        raise ConfigError(f"零点文件不存在: {path}（请先运行 forward）")
    zeros = read_zero_file(path)
    q_ref = resolve_potential(config.potential_ref, config)
    truth = resolve_potential(config.potential_true, config) if config.potential_true else None
    eps = config.eps_list[0] if config.eps_list else 0.0
    perturbed = perturb_zeros(zeros.within(zeros.R), eps, config.seed)

    reconstructor = Reconstructor(config.system_config)
    result = reconstructor.reconstruct_from_zeros(perturbed, q_ref, p=config.p, h=config.h,
                                                  truth=truth, **config.reconstruction_options())
    print(f"✓ sup|估计| = {result.sup_norm():.4e}")
    if result.sup_error() is not None:
        print(f"✓ sup|估计 − 真值| = {result.sup_error():.4e}")
    for warning in result.diagnostics.get('warnings', []):
        print(f"⚠ {warning}")

    with SessionContext(_file_manager(config), 'reconstruct', config.echo()) as session:
        csv_path = session.get_file_path('reconstruction', 'reconstruction.csv')
        write_reconstruction_csv(result, csv_path)
        session.saved.append(csv_path)
        print(f"✓ 文件已保存: {csv_path}")
        session.save_file('reports', 'reconstruction_diagnostics.json', _jsonable(result.diagnostics))
    return {'result': result, 'files': session.saved}


def cmd_sweep(config: SweepConfig) -> Dict[str, Any]:
    """
    (R, ε) 稳定性扫描

    Returns:
        {'report': StabilityReport, 'files': [路径]}
    """
    print("\n🔸 稳定性扫描")
    print("-" * 40)
    q_ref = resolve_potential(config.potential_ref, config)
    q_true = _true_potential(config)
    analyzer = StabilityAnalyzer(config.system_config)
    report: StabilityReport = analyzer.run_sweep(
        q_true, q_ref, config.R_list, config.eps_list, config.p, config.h, config.seed,
        metadata=config.echo(), **config.reconstruction_options())

    failed = int((report.rows['status'] != 'ok').sum()) if len(report) else 0
    print(f"✓ 完成 {len(report)} 个单元（失败 {failed}）")
    if report.fit is not None:
        print(f"✓ 拟合常数 C = {report.fit.constant:.4e}，相对残差 {report.fit.relative_residual:.2%}")

    with SessionContext(_file_manager(config), 'sweep', config.echo()) as session:
        csv_path = session.get_file_path('sweeps', 'stability_report.csv')
        report.to_csv(csv_path)
        session.saved.append(csv_path)
        print(f"✓ 文件已保存: {csv_path}")
        session.metadata['report'] = _jsonable(report.metadata)
    return {'report': report, 'files': session.saved}


def cmd_bound(R: float, eps: float = 0.0, p: float = 2.0) -> Dict[str, float]:
    """
    打印给定 (R, ε, p) 的各包络值

    Returns:
        名称 → 数值
    """
    values = {
        'R': float(R),
        'eps': float(eps),
        'p': float(p),
        'nu': bounds.nu_exponent(p),
        'gamma': bounds.gamma_exponent(p),
        'rho': bounds.default_rho(R),
        'theorem31_envelope': float(bounds.theorem31_envelope(R)),
        'theorem53_envelope': float(bounds.theorem53_envelope(R, p)),
        'perturbation_term': float(bounds.perturbation_term(R, eps)),
        'theorem61_envelope': float(bounds.theorem61_envelope(R, eps, p)),
        'log_w_bound': float(bounds.log_w_bound(R, eps)),
        'exponential_factor_bound': float(bounds.exponential_factor_bound(eps)),
    }
    print("\n🔸 包络值")
    print("-" * 40)
    for key, value in values.items():
        print(f"  {key:<26} {value!r}")
    return values


def _jsonable(data: Dict[str, Any]) -> Dict[str, Any]:
    """诊断字典转为可 JSON 序列化的形式（复数拆成实部虚部）"""
    out = {}
    for key, value in data.items():
        if isinstance(value, complex):
            out[key] = [value.real, value.imag]
        elif isinstance(value, (np.floating, np.integer)):
            out[key] = value.item()
        elif isinstance(value, float) and not math.isfinite(value):
            out[key] = repr(value)
        elif isinstance(value, dict):
            out[key] = _jsonable(value)
        else:
            out[key] = value
    return out


COMMANDS = {
    'forward': cmd_forward,
    'zeros': cmd_zeros,
    'kernels': cmd_kernels,
    'reconstruct': cmd_reconstruct,
    'sweep': cmd_sweep,
}
