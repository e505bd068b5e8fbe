"""
势函数库
Potential Library

测试与实验共用的固定势函数，以及阶梯势 q = c·χ_[0,a] 的闭式 Jost 函数。
闭式解提供 numpy 向量化求值与 mpmath 高精度求值两种途径。
"""

import os
from typing import Dict, Optional, Sequence

import mpmath
import numpy as np

from ..models.potential import Potential, load_potential
from ..solvers.jost_solver import transfer_entries
from ..utils.config_loader import get_project_root


def fixture_dir() -> str:
    """config/potentials 目录"""
    return os.path.join(get_project_root(), 'config', 'potentials')


def builtin_fixtures() -> Dict[str, Potential]:
    """内置势函数（名称 → Potential）"""
    return {
        'zero': Potential.zero(),
        'unit': Potential.constant(1.0),
        'half': Potential.constant(0.5),
        'step4': Potential.step(4.0, 0.25),
        'well': Potential.constant(-20.0),
        'complex': Potential.constant(1.0 + 1.0j),
        'unit_bump': Potential.constant(1.1),
    }


def get_fixture(name: str) -> Potential:
    """
    按名称取势函数：先查内置表，再查 config/potentials/<name>.pot

    Args:
        name: 势函数名称

    Returns:
        Potential
    """
    fixtures = builtin_fixtures()
    if name in fixtures:
        return fixtures[name]
    path = os.path.join(fixture_dir(), f"{name}.pot")
    if not os.path.exists(path):
        raise KeyError(f"未知势函数: {name}")
    return load_potential(path)


def step_potential(n: float) -> Potential:
    """q_n = n·χ_[0,1/n]"""
    return Potential.step(float(n), 1.0 / float(n))


class StepJost:
    """
    阶梯势 q = c·χ_[0,a] 的闭式 Jost 函数

    ψ(z) = e^{iza}·(cos(ka) − i·z·sin(ka)/k)，k = √(z² − c)
    """

    def __init__(self, c: complex, a: float = 1.0):
        """
        Args:
            c: 阶梯高度
            a: 支撑长度（0 < a ≤ 1）
        """
        if not (0.0 < a <= 1.0):
            raise ValueError(f"支撑长度 a={a} 须在 (0, 1] 内")
        self.c = complex(c)
        self.a = float(a)

    @classmethod
    def for_step(cls, n: float) -> "StepJost":
        return cls(float(n), 1.0 / float(n))

    @property
    def potential(self) -> Potential:
        return Potential.step(self.c, self.a)

    def evaluate(self, zs):
        z = np.asarray(zs, dtype=complex)
        a = self.a
        C, S, _ = transfer_entries((z * z - self.c) * a * a)
        out = np.exp(1j * z * a) * (C - 1j * z * a * S)
        return out if out.ndim else complex(out)

    def derivative(self, zs):
        z = np.asarray(zs, dtype=complex)
        a = self.a
        C, S, dS = transfer_entries((z * z - self.c) * a * a)
        phase = np.exp(1j * z * a)
        value = phase * (C - 1j * z * a * S)
        out = 1j * a * value + phase * (-z * a * a * S - 1j * a * S - 2j * z * z * a ** 3 * dS)
        return out if out.ndim else complex(out)

    def __call__(self, zs):
        return self.evaluate(zs)

    def evaluate_mp(self, z: complex, dps: int = 30) -> complex:
        """mpmath 高精度求值"""
        with mpmath.workdps(dps):
            zm = mpmath.mpc(z)
            a = mpmath.mpf(self.a)
            k = mpmath.sqrt(zm * zm - mpmath.mpc(self.c))
            if k == 0:
                bracket = 1 - 1j * zm * a
            else:
                bracket = mpmath.cos(k * a) - 1j * zm * mpmath.sin(k * a) / k
            return complex(mpmath.exp(1j * zm * a) * bracket)

    def batch_mp(self, zs: Sequence[complex], dps: int = 30) -> np.ndarray:
        return np.array([self.evaluate_mp(z, dps) for z in zs], dtype=complex)


def step_jost(n: float, z, exact: bool = False, dps: Optional[int] = None):
    """q_n = n·χ_[0,1/n] 的闭式 Jost 函数"""
    model = StepJost.for_step(n)
    if exact:
        return model.batch_mp(np.atleast_1d(z), dps or 30)
    return model.evaluate(z)
