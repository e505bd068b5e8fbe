"""
尾积分重构模块测试
Tail-Integral Reconstruction Module Tests

测试主值尾核、Fourier 反演、频带分割与由零点重构尾积分的流程
"""

import math
import os
import sys
import tempfile
import unittest

import numpy as np
import pandas as pd
from scipy import integrate

# 添加src目录到Python路径
current_dir = os.path.dirname(os.path.abspath(__file__))
project_root = os.path.dirname(current_dir)
src_dir = os.path.join(project_root, 'src')
sys.path.insert(0, project_root)
sys.path.insert(0, src_dir)

from src.analysis.reconstruction import (Reconstructor, clenshaw_curtis, fourier_invert_diff,
                                         pv_tail, pv_tail_kernel, write_reconstruction_csv)
from src.models.potential import Potential
from src.models.zero_set import ZeroSet
from src.solvers.jost_solver import ForwardJost
from src.solvers.kernel_solver import KernelSolver
from src.solvers.zero_finder import find_zeros
from src.utils.exceptions import ConfigError


def sawtooth_transform(z):
    """D(t) = 1 − t/2（0 ≤ t ≤ 2）的 ∫_0^2 D(t)e^{izt}dt"""
    z = np.asarray(z, dtype=complex)
    out = np.empty_like(z)
    small = np.abs(z) < 1e-3
    zs = z[small]
    out[small] = 1.0 + (2.0 / 3.0) * 1j * zs - zs * zs / 3.0
    zl = z[~small]
    out[~small] = 1j / zl - (np.exp(2j * zl) - 1.0) / (2.0 * zl * zl)
    return out


class TestReconstruction(unittest.TestCase):
    """尾积分重构测试类"""

    def setUp(self):
        """测试前置设置"""
        print(f"\n{'='*50}")
        print(f"开始测试: {self._testMethodName}")
        print(f"{'='*50}")
        self.reconstructor = Reconstructor()
        self.t_grid = np.arange(65) / 32.0

    def test_clenshaw_curtis(self):
        """测试 Clenshaw–Curtis 求积规则"""
        print("测试求积规则...")

        nodes, weights = clenshaw_curtis(16)
        self.assertEqual(nodes.size, 17)
        self.assertAlmostEqual(float(np.sum(weights)), 2.0, places=13)
        self.assertAlmostEqual(float(np.sum(weights * nodes ** 2)), 2.0 / 3.0, places=13)
        self.assertAlmostEqual(float(np.sum(weights * np.exp(nodes))), math.e - 1.0 / math.e, places=12)
        with self.assertRaises(ValueError):
            clenshaw_curtis(7)

        print("✓ 求积规则测试通过")

    def test_pv_tail(self):
        """测试主值尾核与振荡积分的比较"""
        print("测试主值尾核...")

        self.assertEqual(pv_tail_kernel(100.0, 0.0), 0.0)
        self.assertAlmostEqual(pv_tail_kernel(64.0, 0.7), pv_tail(2.0, 0.7), places=12)

        a = 2.0
        for t in (0.3, 1.0, 1.7):
            oracle, _ = integrate.quad(lambda z: 1.0 / z, a, np.inf, weight='sin', wvar=t)
            self.assertAlmostEqual(pv_tail(a, t), oracle / math.pi, places=6)
            self.assertAlmostEqual(pv_tail(a, -t), -pv_tail(a, t), places=14)

        # a → 0 时趋于 sign(t)/2
        self.assertAlmostEqual(pv_tail(1e-12, 1.0), 0.5, places=10)
        values = pv_tail(a, np.array([0.0, 0.5, 1.5]))
        self.assertEqual(values.shape, (3,))
        self.assertEqual(values[0], 0.0)

        with self.assertRaises(ValueError):
            pv_tail_kernel(0.0, 1.0)

        print("✓ 主值尾核测试通过")

    def test_fourier_invert_zero(self):
        """测试零差值的反演与窗口警告"""
        print("测试零差值反演...")

        def zero_df(z):
            return np.zeros(np.shape(z), dtype=complex)

        D = self.reconstructor.fourier_invert_diff(zero_df, 30.0, self.t_grid)
        self.assertEqual(D.sup(), 0.0)
        self.assertEqual(D.c0, 0j)
        self.assertEqual(D.warnings, [])

        narrow = self.reconstructor.fourier_invert_diff(zero_df, 5.0, self.t_grid)
        self.assertEqual(len(narrow.warnings), 1)

        with self.assertRaises(ValueError):
            self.reconstructor.fourier_invert_diff(zero_df, 0.0, self.t_grid)

        print("✓ 零差值反演测试通过")

    def test_fourier_invert_known_transform(self):
        """测试已知变换对的反演，含 1/z 尾部修正"""
        print("测试已知变换反演...")

        D = self.reconstructor.fourier_invert_diff(sawtooth_transform, 40.0, self.t_grid)
        expected = 1.0 - self.t_grid / 2.0
        interior = (self.t_grid >= 0.25) & (self.t_grid <= 1.75)
        error = float(np.max(np.abs(D.values[interior] - expected[interior])))
        print(f"  内部误差 {error:.3e}, c0 = {D.c0:.4f}")
        self.assertLess(error, 0.05)
        self.assertAlmostEqual(D.c0, 1.0, delta=0.05)
        self.assertLess(abs(D.values[0] - 1.0), 0.1)
        self.assertEqual(D.values[-1], 0.0)
        self.assertAlmostEqual(D(0.5), D.values[16], delta=1e-15)

        # 不加尾部修正时 t 较小处误差明显更大
        raw = self.reconstructor.fourier_invert_diff(sawtooth_transform, 40.0, self.t_grid,
                                                     tail_correction=False)
        self.assertEqual(raw.c0, 0j)
        self.assertGreater(abs(raw.values[0] - 1.0), abs(D.values[0] - 1.0))

        # 模块级入口
        again = fourier_invert_diff(sawtooth_transform, 40.0, self.t_grid)
        np.testing.assert_allclose(again.values, D.values, rtol=0, atol=1e-12)

        print("✓ 已知变换反演测试通过")

    def test_invert_against_kernel_row(self):
        """测试 q ≡ 0 与 q̃ ≡ 1 的反演结果与 K(0,·) 网格行一致，且随窗口加宽误差减小"""
        print("测试反演与核网格行比较...")

        one = Potential.constant(1.0)
        K = KernelSolver().k_kernel(Potential.zero(), one, h=1.0 / 64)
        t = K.t_nodes
        row = K.boundary_row()
        forward = ForwardJost(one)

        def df(z):
            return np.asarray(forward.evaluate(z)) - 1.0

        errors = {}
        for Z in (20.0, 200.0):
            D = self.reconstructor.fourier_invert_diff(df, Z, t)
            errors[Z] = float(np.max(np.abs(D.values - row)))
            print(f"  Z={Z:g}: sup 误差 {errors[Z]:.3e}, c0 = {D.c0:.4f}")
        self.assertLessEqual(errors[200.0], 0.02)
        self.assertLess(errors[200.0], errors[20.0])

        print("✓ 反演与核网格行比较测试通过")

    def test_band_split(self):
        """测试频带分割"""
        print("测试频带分割...")

        inner, tail = self.reconstructor.band_split_diff(sawtooth_transform, 64.0 ** 2, self.t_grid, p=2.0)
        self.assertAlmostEqual(inner.window, 4.0, places=10)
        self.assertEqual(inner.tail_R, 4096.0)
        self.assertAlmostEqual(inner.c0, 1.0, delta=0.5)

        t = np.linspace(0.0, 2.0, 41)
        envelope = np.asarray(tail(t))
        self.assertEqual(float(envelope[0]), 1.0)
        self.assertTrue(np.all(np.diff(envelope) <= 1e-15))
        self.assertTrue(np.all(envelope > 0))

        print("✓ 频带分割测试通过")

    def test_reconstruct_validation(self):
        """测试重构参数检查"""
        print("测试重构参数检查...")

        with self.assertRaises(ConfigError):
            self.reconstructor.reconstruct_from_zeros(ZeroSet.empty(10.0), Potential.zero())
        with self.assertRaises(ConfigError):
            self.reconstructor.reconstruct_from_zeros(ZeroSet.empty(30.0), Potential.zero(),
                                                      target_mode='other')

        print("✓ 重构参数检查测试通过")

    def test_reconstruct_free_case(self):
        """测试 q = q̃ = 0 时估计恒为零"""
        print("测试自由情形重构...")

        result = self.reconstructor.reconstruct_from_zeros(
            ZeroSet.empty(30.0), Potential.zero(), h=1.0 / 32, truth=Potential.zero(), refine=True)
        self.assertEqual(result.sup_norm(), 0.0)
        self.assertEqual(result.sup_error(), 0.0)
        self.assertEqual(result.x.size, 33)
        self.assertEqual(result.diagnostics['refine_status'], 'converged')
        self.assertEqual(result.diagnostics['n_zeros'], 0)
        self.assertEqual(result.diagnostics['correction_envelope'], 0.0)
        self.assertAlmostEqual(result.diagnostics['Z'], 30.0 ** (1.0 / 6.0), places=10)
        # 窗口过窄的警告被记录
        self.assertTrue(result.diagnostics['warnings'])
        for key in ('R', 'eps', 'p', 'h', 'nu', 'gamma', 'c0', 'B0_sup',
                    'correction_envelope', 'bound_shape', 'sup_norm', 'sup_error'):
            self.assertIn(key, result.diagnostics)

        print("✓ 自由情形重构测试通过")

    def test_reconstruct_self(self):
        """测试以 q ≡ 1 自身零点重构时 R=120 的估计足够小"""
        print("测试自身重构...")

        q = Potential.constant(1.0)
        zs = find_zeros(ForwardJost(q), 120.0, 1e-10)
        result = self.reconstructor.reconstruct_from_zeros(zs, q, h=1.0 / 32, truth=q)
        values = result.estimate.values
        self.assertTrue(np.all(np.isfinite(values)))
        self.assertEqual(values[-1], 0.0)
        self.assertAlmostEqual(result.sup_error(), result.sup_norm(), places=12)
        self.assertEqual(result.diagnostics['target_mode'], 'reference')
        self.assertEqual(result.diagnostics['calibration_degree'], 3)
        print(f"  reference/三次 g: sup|估计| = {result.sup_norm():.3e}")
        self.assertLess(result.sup_norm(), 0.05)

        # 修正项包络在网格上取上确界；C0 = 0 时等于 B0_sup·8Q·e^{2Q}
        B0_sup = result.diagnostics['B0_sup']
        self.assertAlmostEqual(result.diagnostics['correction_envelope'],
                               B0_sup * 8.0 * math.exp(2.0), delta=1e-12 * max(1.0, B0_sup))

        # 两点线性标定吸收不了圆盘外零点的贡献
        linear = self.reconstructor.reconstruct_from_zeros(
            zs, q, h=1.0 / 32, target_mode='unit', calibration_degree=1, truth=q)
        self.assertEqual(linear.diagnostics['calibration_degree'], 1)
        print(f"  unit/一次 g: sup|估计| = {linear.sup_norm():.3e}")
        self.assertLess(result.sup_norm(), linear.sup_norm())

        with self.assertRaises(ConfigError):
            self.reconstructor.reconstruct_from_zeros(zs, q, h=1.0 / 32, calibration_degree=5)

        print("✓ 自身重构测试通过")

    def test_self_reconstruction_convergence(self):
        """测试自身重构误差在 R=240 时小于 R=30 时的 1/3"""
        print("测试自身重构收敛...")

        for q in (Potential.constant(1.0), Potential.step(4.0, 0.25)):
            zeros = find_zeros(ForwardJost(q), 240.0, 1e-10)
            sup = {}
            for R in (30.0, 240.0):
                result = self.reconstructor.reconstruct_from_zeros(zeros.within(R), q, h=1.0 / 32)
                sup[R] = result.sup_norm()
            print(f"  {q.to_spec_text().splitlines()[0]}: R=30 {sup[30.0]:.3e}, R=240 {sup[240.0]:.3e}")
            self.assertLess(sup[240.0], sup[30.0] / 3.0)

        print("✓ 自身重构收敛测试通过")

    def test_write_csv(self):
        """测试重构结果 CSV"""
        print("测试结果文件...")

        result = self.reconstructor.reconstruct_from_zeros(
            ZeroSet.empty(30.0), Potential.zero(), h=1.0 / 32, truth=Potential.constant(1.0))
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'reconstruction.csv')
            write_reconstruction_csv(result, path)
            with open(path, 'r', encoding='utf-8') as f:
                header = [line.strip() for line in f if line.startswith('#')]
            self.assertIn('# R=30.0', header)
            self.assertIn("# target_mode='reference'", header)
            self.assertIn('# calibration_degree=3', header)

            frame = pd.read_csv(path, comment='#')
            self.assertEqual(list(frame.columns), ['x', 'est_re', 'est_im', 'truth_re', 'truth_im'])
            self.assertEqual(len(frame), 33)
            np.testing.assert_allclose(frame['truth_re'].to_numpy(), 1.0 - frame['x'].to_numpy(), atol=1e-12)
            self.assertEqual(float(frame['est_re'].abs().max()), 0.0)

        print("✓ 结果文件测试通过")


def run_tests():
    """运行所有测试"""
    print("尾积分重构模块测试")
    print("="*60)

    suite = unittest.TestLoader().loadTestsFromTestCase(TestReconstruction)
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
