"""
Hadamard 分解模块测试
Hadamard Factorization Module Tests

测试初等因子、截断乘积、指数因子标定、零点扰动比 W 与乘积尾部界
"""

import math
import os
import sys
import unittest
from functools import lru_cache

import numpy as np

# 添加src目录到Python路径
current_dir = os.path.dirname(os.path.abspath(__file__))
project_root = os.path.dirname(current_dir)
src_dir = os.path.join(project_root, 'src')
sys.path.insert(0, project_root)
sys.path.insert(0, src_dir)

from src.analysis.bounds import kappa, log_w_bound, theorem31_envelope
from src.analysis.factorization import (FactorizedJost, annulus_product, calibration_heights,
                                        elementary_factor,
                                        elementary_factor_minus_1, log_elementary_factor,
                                        log_ratio_W, normalize, ratio_W, tail_bound_pi,
                                        truncated_product)
from src.models.potential import Potential
from src.models.zero_set import ZeroSet, perturb_zeros
from src.solvers.jost_solver import ForwardJost
from src.solvers.zero_finder import find_zeros
from src.utils.exceptions import BoundDomainError, PairingError, PoleError


@lru_cache(maxsize=None)
def unit_zeros(R: float) -> ZeroSet:
    """q ≡ 1 在 |z| < R 内的零点（各测试共用）"""
    return find_zeros(ForwardJost(Potential.constant(1.0)), R, 1e-10)


class TestFactorization(unittest.TestCase):
    """Hadamard 分解测试类"""

    def setUp(self):
        """测试前置设置"""
        print(f"\n{'='*50}")
        print(f"开始测试: {self._testMethodName}")
        print(f"{'='*50}")

    def test_elementary_factor(self):
        """测试初等因子 E(w) = (1 − w)e^w"""
        print("测试初等因子...")

        self.assertEqual(elementary_factor(0.0), 1.0)
        self.assertEqual(elementary_factor(1.0), 0.0)
        self.assertAlmostEqual(elementary_factor(0.3), 0.7 * math.exp(0.3), places=14)
        self.assertAlmostEqual(elementary_factor(0.3).real, 0.944901, places=6)

        # 小 |w| 时 E − 1 ≈ −w²/2
        w = 1e-9 + 2e-9j
        self.assertAlmostEqual(elementary_factor_minus_1(w) / (-w * w / 2), 1.0, places=6)
        self.assertEqual(elementary_factor_minus_1(1.0), -1.0)

        # |log E(w)| ≤ 2|w|²（|w| ≤ 1/2）
        rng = np.random.default_rng(0)
        ws = 0.5 * np.sqrt(rng.random(500)) * np.exp(2j * np.pi * rng.random(500))
        logs = np.asarray(log_elementary_factor(ws))
        self.assertTrue(np.all(np.abs(logs) <= 2.0 * np.abs(ws) ** 2 + 1e-15))
        np.testing.assert_allclose(np.exp(logs), elementary_factor(ws), rtol=1e-12)

        print("✓ 初等因子测试通过")

    def test_truncated_product(self):
        """测试截断乘积"""
        print("测试截断乘积...")

        self.assertEqual(truncated_product(ZeroSet.empty(10.0), 1.5 + 2j), 1.0)
        self.assertEqual(truncated_product(ZeroSet.from_values([2.0], 10.0), 2.0), 0.0)

        pair = ZeroSet.from_values([3j, -3j], 10.0)
        direct = elementary_factor(1 / 3j) * elementary_factor(-1 / 3j)
        self.assertAlmostEqual(truncated_product(pair, 1.0), direct, delta=1e-15)
        self.assertAlmostEqual(direct, abs(elementary_factor(1 / 3j)) ** 2, delta=1e-15)

        # 超过 64 个因子时改用对数累加，结果一致
        rng = np.random.default_rng(1)
        roots = rng.uniform(-40, 40, 80) - 1j * rng.uniform(1, 4, 80)
        many = ZeroSet.from_values(roots, 50.0)
        z = 1.3 - 0.2j
        direct = np.prod([(1 - z / r) * np.exp(z / r) for r in roots])
        self.assertAlmostEqual(truncated_product(many, z), direct, delta=1e-12 * abs(direct))

        # 按最小模分成两段的乘积
        inner = ZeroSet.from_values([r for r in roots if abs(r) < 20], 50.0)
        combined = truncated_product(inner, z) * annulus_product(many, 20.0, z)
        self.assertAlmostEqual(combined, direct, delta=1e-12 * abs(direct))

        with self.assertRaises(ValueError):
            truncated_product(ZeroSet.from_values([0.0, 1.0], 10.0), 0.5)

        print("✓ 截断乘积测试通过")

    def test_normalize_free_case(self):
        """测试空零点集合与单位目标的标定"""
        print("测试自由情形标定...")

        model = normalize(ZeroSet.empty(30.0))
        self.assertEqual(model.n0, 0)
        self.assertEqual(model.a0, 0)
        self.assertEqual(model.a1, 0)
        self.assertEqual(model.degree, 3)
        self.assertEqual(model.g_coeffs, (0j, 0j, 0j, 0j))
        zs = np.array([0.0, 2.5, -1.0 + 3.0j, 4.0 - 2.0j])
        np.testing.assert_array_equal(model.evaluate(zs), np.ones(4))

        y1, y2 = calibration_heights(1000.0)
        self.assertAlmostEqual(y1, 30.0, places=10)
        self.assertAlmostEqual(y2, 60.0, places=10)
        np.testing.assert_allclose(calibration_heights(1000.0, 3), [30.0, 40.0, 50.0, 60.0], rtol=1e-12)
        with self.assertRaises(ValueError):
            calibration_heights(1000.0, 0)

        print("✓ 自由情形标定测试通过")

    def test_normalize_calibration(self):
        """测试标定点处模型与目标一致，原点零点通过 n0 表示"""
        print("测试标定残差...")

        zs = unit_zeros(30.0)
        reference = ForwardJost(Potential.constant(1.0))
        for ref in (None, reference):
            for degree in (1, 3):
                model = normalize(zs, reference=ref, degree=degree)
                y = 1j * np.array(calibration_heights(30.0, degree))
                np.testing.assert_allclose(model.calibration, y.imag, rtol=1e-14)
                target = np.ones(y.size) if ref is None else np.asarray(reference.evaluate(y))
                self.assertLess(float(np.max(np.abs(np.asarray(model.evaluate(y)) - target))), 1e-8)

        # 一次 g 即两点线性系统
        linear = normalize(zs, degree=1)
        y1, y2 = calibration_heights(30.0)
        d1 = -np.log(np.asarray(truncated_product(zs, 1j * y1)))
        d2 = -np.log(np.asarray(truncated_product(zs, 1j * y2)))
        self.assertAlmostEqual(linear.a1, (d2 - d1) / (1j * (y2 - y1)), delta=1e-10)
        self.assertAlmostEqual(linear.a0, d1 - linear.a1 * 1j * y1, delta=1e-10)

        with_origin = ZeroSet.from_values([0.0, 0.0, 2.0 - 1.0j], 30.0)
        model = normalize(with_origin)
        self.assertEqual(model.n0, 2)
        self.assertEqual(len(model.zeros), 1)
        self.assertEqual(model.evaluate(0.0), 0.0)

        with self.assertRaises(ValueError):
            normalize(zs, degree=7)

        print("✓ 标定残差测试通过")

    def test_model_derivative(self):
        """测试分解模型导数与有限差分一致"""
        print("测试模型导数...")

        model = normalize(unit_zeros(30.0))
        d = 1e-5
        for z in (0.5 + 0.1j, -2.0 + 1.0j, 3.0 - 0.5j):
            fd = (model.evaluate(z + d) - model.evaluate(z - d)) / (2 * d)
            self.assertAlmostEqual(model.derivative(z), fd, delta=1e-6 * max(1.0, abs(fd)))

        # 恰好落在单零点上
        single = FactorizedJost(ZeroSet.from_values([2.0], 10.0), 0, (0j, 0j), 1.0)
        self.assertAlmostEqual(single.derivative(2.0), -math.e / 2.0, delta=1e-14)

        print("✓ 模型导数测试通过")

    def test_model_error_shape(self):
        """测试圆盘内零点一致时实轴上 sup|模型 − ψ|·R^{1/3} 有界且无增长趋势"""
        print("测试模型误差形状...")

        reference = ForwardJost(Potential.constant(1.0))
        radii = (30.0, 60.0, 120.0, 240.0)
        scaled = []
        errors = []
        for R in radii:
            model = normalize(unit_zeros(R))
            w = R ** (1.0 / 3.0)
            pts = np.linspace(-w, w, 201)
            error = float(np.max(np.abs(np.asarray(model.evaluate(pts)) - np.asarray(reference.evaluate(pts)))))
            errors.append(error)
            scaled.append(error / float(theorem31_envelope(R)))
            print(f"  R={R:g}: sup 误差 {error:.3e}, 误差·R^(1/3) = {scaled[-1]:.3e}")

        median = float(np.median(scaled))
        for value in scaled:
            self.assertLessEqual(value, 3.0 * median)
            self.assertGreaterEqual(value, median / 3.0)
        self.assertLess(errors[-1], errors[0])
        slope = np.polyfit(np.log(radii), np.log(scaled), 1)[0]
        self.assertLessEqual(slope, 0.25)

        print("✓ 模型误差形状测试通过")

    def test_reference_calibration_accuracy(self):
        """测试以 ψ 自身为目标时三次 g 吸收圆盘外零点的贡献"""
        print("测试参考目标标定精度...")

        reference = ForwardJost(Potential.constant(1.0))
        zs = unit_zeros(120.0)
        pts = np.linspace(-3.0, 3.0, 61)
        truth = np.asarray(reference.evaluate(pts))

        cubic = normalize(zs, reference=reference, degree=3)
        linear = normalize(zs, reference=reference, degree=1)
        err_cubic = float(np.max(np.abs(np.asarray(cubic.evaluate(pts)) - truth)))
        err_linear = float(np.max(np.abs(np.asarray(linear.evaluate(pts)) - truth)))
        print(f"  R=120: 一次 g 误差 {err_linear:.3e}, 三次 g 误差 {err_cubic:.3e}")

        self.assertLess(err_cubic, 0.05)
        self.assertLess(err_cubic, err_linear / 5.0)
        self.assertAlmostEqual(cubic.evaluate(0.0), math.cosh(1.0), delta=0.05)

        print("✓ 参考目标标定精度测试通过")

    def test_ratio_W(self):
        """测试零点扰动比 W"""
        print("测试扰动比 W...")

        one = ZeroSet.from_values([1 + 1j], 10.0)
        moved = ZeroSet.from_values([1.1 + 1j], 10.0)
        value = ratio_W(one, moved, 0.0)
        self.assertAlmostEqual(value, (-1 - 1j) / (-1.1 - 1j), delta=1e-15)
        self.assertAlmostEqual(value.real, 0.950226, delta=1e-6)
        self.assertAlmostEqual(value.imag, 0.045249, delta=1e-6)

        zs = unit_zeros(30.0)
        rng = np.random.default_rng(3)
        pts = rng.uniform(-20, 20, 100) + 1j * rng.uniform(-5, 5, 100)
        np.testing.assert_array_equal(ratio_W(zs, zs, pts), np.ones(100))

        # |log W(z)| ≤ 17e·ε·R^{1/6}（实轴上 |z − z̃_n| ≥ 1 的点）
        eps = 0.01
        R = 30.0
        perturbed = perturb_zeros(zs, eps, seed=9)
        reals = np.linspace(-R ** (1.0 / 6.0), R ** (1.0 / 6.0), 41)
        ok = np.array([np.min(np.abs(x - perturbed.values)) >= 1.0 for x in reals])
        logs = np.abs(np.asarray(log_ratio_W(zs, perturbed, reals[ok])))
        self.assertTrue(np.all(logs <= log_w_bound(R, eps)))

        with self.assertRaises(PairingError):
            ratio_W(one, ZeroSet.from_values([1.0, 2.0], 10.0), 0.0)
        with self.assertRaises(PoleError):
            ratio_W(one, moved, 1.1 + 1j)

        print("✓ 扰动比 W 测试通过")

    def test_tail_bound(self):
        """测试乘积尾部界"""
        print("测试尾部界...")

        self.assertEqual(tail_bound_pi(100.0, 0.0), 0.0)
        expected = 0.72 * math.exp(0.72)
        self.assertAlmostEqual(tail_bound_pi(100.0, 1.0), expected, places=12)
        self.assertAlmostEqual(tail_bound_pi(10000.0, 10j), expected, places=12)

        with self.assertRaises(BoundDomainError):
            tail_bound_pi(100.0, 60.0)
        with self.assertRaises(BoundDomainError):
            tail_bound_pi(100.0, 1.0, kappa=kappa(1.0))
        self.assertGreater(tail_bound_pi(300.0, 1.0, kappa=kappa(1.0)), 0.0)

        # 两种截断半径的比较：外环乘积与 1 的差受尾部界控制
        zs = unit_zeros(120.0)
        z = 1.0 + 0.5j
        outer = annulus_product(zs, 60.0, z)
        self.assertLessEqual(abs(outer - 1.0), tail_bound_pi(60.0, z))

        print("✓ 尾部界测试通过")


def run_tests():
    """运行所有测试"""
    print("Hadamard 分解模块测试")
    print("="*60)

    suite = unittest.TestLoader().loadTestsFromTestCase(TestFactorization)
    runner = unittest.TextTestRunner(verbosity=2)
    result = runner.run(suite)

    print("\n" + "="*60)
    print("测试结果总结:")
    print(f"运行测试数: {result.testsRun}")
    print(f"成功: {result.testsRun - len(result.failures) - len(result.errors)}")
    print(f"失败: {len(result.failures)}")
    print(f"错误: {len(result.errors)}")

    success = len(result.failures) + len(result.errors) == 0
    print(f"\n整体测试结果: {'✅ 通过' if success else '❌ 失败'}")
    return success


if __name__ == "__main__":
    run_tests()
