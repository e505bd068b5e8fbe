"""
稳定性分析器
Stability Analyzer

在 (R, ε) 网格上运行“求零点 → 扰动 → 重构 → 与真实尾积分比较”的流程，
汇总为稳定性报告，并对误差列拟合包络常数。
"""

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import psutil

from ..models.potential import Potential
from ..models.zero_set import ZeroSet, perturb_zeros
from ..solvers.jost_solver import ForwardJost, JostSolver
from ..solvers.zero_finder import ZeroFinder
from ..utils.exceptions import ResolabError
from . import bounds
from .reconstruction import Reconstructor

log = logging.getLogger(__name__)

REPORT_COLUMNS = ['R', 'eps', 'empirical_sup_error', 'envelope', 'fitted_C', 'status']


@dataclass
class StabilityReport:
    """
    稳定性报告

    每个 (R, ε) 一行，按 (R, ε) 排序；失败的单元 empirical_sup_error 为 NaN，
    status 记录异常类型与信息。
    """

    rows: pd.DataFrame
    metadata: Dict[str, Any] = field(default_factory=dict)
    fit: Optional[bounds.EnvelopeFit] = None

    @classmethod
    def empty(cls, metadata: Optional[Dict[str, Any]] = None) -> "StabilityReport":
        return cls(pd.DataFrame(columns=REPORT_COLUMNS), dict(metadata or {}))

    def __len__(self) -> int:
        return len(self.rows)

    def ok_rows(self) -> pd.DataFrame:
        return self.rows[self.rows['status'] == 'ok']

    def errors_by_R(self, eps: float) -> pd.Series:
        """固定 ε，误差随 R 的序列"""
        sub = self.ok_rows()
        sub = sub[np.isclose(sub['eps'].astype(float), eps)]
        return sub.set_index('R')['empirical_sup_error'].astype(float).sort_index()

    def errors_by_eps(self, R: float) -> pd.Series:
        """固定 R，误差随 ε 的序列"""
        sub = self.ok_rows()
        sub = sub[np.isclose(sub['R'].astype(float), R)]
        return sub.set_index('eps')['empirical_sup_error'].astype(float).sort_index()

    def to_csv(self, path) -> None:
        self.rows.to_csv(path, index=False, lineterminator='\n')


def is_monotone(values: Sequence[float], increasing: bool, noise: float = 0.2) -> bool:
    """
    噪声带内的单调性：每个值不超出前面所有值的极值 (1 ± noise) 倍

    Args:
        values: 序列
        increasing: True 检查非降，False 检查非增
        noise: 相对噪声带

    Returns:
        是否单调
    """
    vals = [float(v) for v in values]
    for k in range(1, len(vals)):
        if increasing:
            if vals[k] < (1.0 - noise) * max(vals[:k]):
                return False
        elif vals[k] > (1.0 + noise) * min(vals[:k]):
            return False
    return True


class StabilityAnalyzer:
    """稳定性扫描器"""

    def __init__(self, config_path: Optional[str] = None):
        """
        初始化扫描器

        Args:
            config_path: 系统配置文件路径
        """
        self.config_path = config_path
        self.jost_solver = JostSolver(config_path)
        self.zero_finder = ZeroFinder(config_path)
        self.reconstructor = Reconstructor(config_path)
        self._zero_cache: Dict[Tuple[str, float], ZeroSet] = {}

    def forward_zeros(self, q_true: Potential, R: float, tol: float = 1e-10) -> ZeroSet:
        """q_true 在 |z| < R 内的零点（按势函数与半径缓存）"""
        key = (q_true.to_spec_text(), float(R))
        if key not in self._zero_cache:
            self._zero_cache[key] = self.zero_finder.find_zeros(
                ForwardJost(q_true, self.jost_solver), R, tol)
        return self._zero_cache[key]

    def run_cell(self, zeros: ZeroSet, R: float, eps: float, q_ref: Potential, q_true: Potential,
                 p: float, h: float, seed: int, **options) -> Dict[str, Any]:
        """
        单个 (R, ε) 单元

        Args:
            zeros: 半径 ≥ R 的零点集合
            R: 圆盘半径
            eps: 扰动水平
            q_ref: 参考势函数
            q_true: 真实势函数
            p: Lp 指数
            h: 核网格步长
            seed: 扰动种子
            **options: 传给重构的选项（target_mode, calibration_degree, refine）

        Returns:
            报告行（不含 fitted_C）
        """
        row = {'R': float(R), 'eps': float(eps), 'empirical_sup_error': math.nan,
               'envelope': math.nan, 'status': 'ok'}
        process = psutil.Process()
        start_time = time.time()
        start_memory = process.memory_info().rss / 1024 / 1024
        try:
            row['envelope'] = float(bounds.theorem61_envelope(R, eps, p))
            perturbed = perturb_zeros(zeros.within(R), eps, seed)
            result = self.reconstructor.reconstruct_from_zeros(
                perturbed, q_ref, p=p, h=h, truth=q_true, **options)
            row['empirical_sup_error'] = float(result.sup_error())
        except (ResolabError, ValueError, ArithmeticError) as e:
            row['status'] = f"failed: {type(e).__name__}: {e}"
            log.warning("单元 R=%g eps=%g 失败: %s", R, eps, e)
        elapsed = time.time() - start_time
        memory_delta = process.memory_info().rss / 1024 / 1024 - start_memory
        log.info("单元 R=%g eps=%g 用时 %.2fs 内存变化 %.1fMB 状态 %s",
                 R, eps, elapsed, memory_delta, row['status'])
        return row

    def run_sweep(self, q_true: Potential, q_ref: Potential, R_list: Sequence[float],
                  eps_list: Sequence[float], p: float = 2.0, h: float = 1.0 / 64, seed: int = 0,
                  metadata: Optional[Dict[str, Any]] = None, **options) -> StabilityReport:
        """
        (R, ε) 网格扫描

        零点在 max(R_list) 圆盘内求一次，各 R 取子集；任一单元失败只记录在
        status 列，扫描继续。

        Returns:
            StabilityReport
        """
        meta = dict(metadata or {})
        meta.update({'p': p, 'h': h, 'seed': seed})
        if not R_list or not eps_list:
            return StabilityReport.empty(meta)

        R_max = max(R_list)
        try:
            zeros = self.forward_zeros(q_true, R_max)
        except (ResolabError, ValueError, ArithmeticError) as e:
            log.error("零点计算失败: %s", e)
            rows = [{'R': float(R), 'eps': float(eps), 'empirical_sup_error': math.nan,
                     'envelope': math.nan, 'status': f"failed: {type(e).__name__}: {e}"}
                    for R in R_list for eps in eps_list]
            frame = pd.DataFrame(rows)
            frame['fitted_C'] = math.nan
            return StabilityReport(frame[REPORT_COLUMNS], meta)

        rows = []
        for R in sorted(R_list):
            for eps in sorted(eps_list):
                print(f"  单元 R={R:g}, eps={eps:g} ...")
                rows.append(self.run_cell(zeros, R, eps, q_ref, q_true, p, h, seed, **options))

        frame = pd.DataFrame(rows).sort_values(['R', 'eps'], kind='mergesort').reset_index(drop=True)
        ok = frame[(frame['status'] == 'ok') & (frame['envelope'] > 0)]
        fit = None
        if len(ok) >= 3:
            fit = bounds.fit_envelope(list(zip(ok['envelope'], ok['empirical_sup_error'])))
            frame['fitted_C'] = fit.constant
            meta['fit_relative_residual'] = fit.relative_residual
        else:
            frame['fitted_C'] = math.nan
        return StabilityReport(frame[REPORT_COLUMNS], meta, fit)

    def perturbation_increments(self, report: StabilityReport, R: float) -> List[Tuple[float, float]]:
        """
        固定 R 时 ε 引起的误差增量与扰动项形状

        Returns:
            [(perturbation_term(R, ε), error(ε) − error(0))]，ε > 0
        """
        series = report.errors_by_eps(R)
        if 0.0 not in series.index:
            return []
        base = float(series.loc[0.0])
        return [(float(bounds.perturbation_term(R, eps)), float(err) - base)
                for eps, err in series.items() if eps > 0]
