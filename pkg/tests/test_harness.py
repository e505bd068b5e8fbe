"""
实验编排与命令行测试
Experiment Harness and CLI Tests

测试实验配置校验、各命令的输出文件、文件管理器与命令行退出码
"""

import json
import math
import os
import sys
import tempfile
import unittest

import numpy as np
import pandas as pd
import yaml
from pydantic import ValidationError

# 添加src目录到Python路径
current_dir = os.path.dirname(os.path.abspath(__file__))
project_root = os.path.dirname(current_dir)
src_dir = os.path.join(project_root, 'src')
sys.path.insert(0, project_root)
sys.path.insert(0, src_dir)

from main import EXIT_CONFIG, EXIT_OK, main as cli_main
from src.experiments.harness import (SweepConfig, _jsonable, cmd_bound, cmd_forward, cmd_kernels,
                                     cmd_reconstruct, cmd_sweep, cmd_zeros, load_sweep_config,
                                     resolve_potential)
from src.models.zero_set import read_zero_file
from src.utils.exceptions import ConfigError
from src.utils.file_manager import ExperimentFileManager, SessionContext


def write_config(directory: str, name: str = 'experiment.yaml', **experiment) -> str:
    """在 directory 下写出实验配置，返回路径"""
    section = {'out_dir': 'out'}
    section.update(experiment)
    path = os.path.join(directory, name)
    with open(path, 'w', encoding='utf-8') as f:
        yaml.safe_dump({'experiment': section}, f)
    return path


def read_bytes(path) -> bytes:
    with open(path, 'rb') as f:
        return f.read()


class TestHarness(unittest.TestCase):
    """实验编排测试类"""

    def setUp(self):
        """测试前置设置"""
        print(f"\n{'='*50}")
        print(f"开始测试: {self._testMethodName}")
        print(f"{'='*50}")
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = self._tmp.name

    def tearDown(self):
        self._tmp.cleanup()

    def test_sweep_config_validation(self):
        """测试实验配置校验"""
        print("测试配置校验...")

        config = SweepConfig(R_list=[30.0, 60.0], eps_list=[0.0, 0.1])
        self.assertEqual(config.R_max, 60.0)
        self.assertEqual(config.reconstruction_options(), {})
        self.assertNotIn('base_dir', config.echo())

        bad_inputs = [
            {'R_list': [60.0, 30.0]},
            {'R_list': [30.0, 30.0]},
            {'R_list': [0.5, 30.0]},
            {'eps_list': [0.75]},
            {'eps_list': [-0.1]},
            {'p': 1.0},
            {'p': 2.5},
            {'h': 0.1},
            {'target_mode': 'other'},
            {'calibration_degree': 7},
            {'unknown_key': 1},
        ]
        for kwargs in bad_inputs:
            with self.assertRaises(ValidationError, msg=str(kwargs)):
                SweepConfig(**kwargs)

        with self.assertRaises(ConfigError):
            SweepConfig().R_max

        options = SweepConfig(target_mode='reference', refine=False).reconstruction_options()
        self.assertEqual(options, {'target_mode': 'reference', 'refine': False})

        print("✓ 配置校验测试通过")

    def test_load_sweep_config(self):
        """测试读取实验配置文件"""
        print("测试读取配置...")

        shipped = load_sweep_config(os.path.join(project_root, 'config', 'experiment_config.yaml'))
        self.assertEqual(shipped.R_list, [30.0, 60.0, 120.0, 240.0])
        self.assertEqual(shipped.base_dir, os.path.join(project_root, 'config'))
        self.assertAlmostEqual(resolve_potential(shipped.potential_true, shipped).evaluate(0.5), 0.5)
        self.assertEqual(shipped.reconstruction_options(),
                         {'target_mode': 'reference', 'calibration_degree': 3, 'refine': False})

        path = write_config(self.tmp, R_list=[30.0])
        config = load_sweep_config(path, out_dir='elsewhere')
        self.assertEqual(config.out_dir, 'elsewhere')
        self.assertEqual(config.base_dir, self.tmp)

        # 顶层即配置字典也可接受
        flat = os.path.join(self.tmp, 'flat.yaml')
        with open(flat, 'w', encoding='utf-8') as f:
            yaml.safe_dump({'R_list': [40.0]}, f)
        self.assertEqual(load_sweep_config(flat).R_list, [40.0])

        with self.assertRaises(ConfigError):
            load_sweep_config(os.path.join(self.tmp, 'missing.yaml'))
        broken = os.path.join(self.tmp, 'broken.yaml')
        with open(broken, 'w', encoding='utf-8') as f:
            f.write("experiment: [unclosed\n")
        with self.assertRaises(ConfigError):
            load_sweep_config(broken)
        listed = os.path.join(self.tmp, 'listed.yaml')
        with open(listed, 'w', encoding='utf-8') as f:
            f.write("- 1\n- 2\n")
        with self.assertRaises(ConfigError):
            load_sweep_config(listed)
        with self.assertRaises(ConfigError):
            load_sweep_config(write_config(self.tmp, 'bad.yaml', p=3.0))

        print("✓ 读取配置测试通过")

    def test_resolve_potential(self):
        """测试势函数解析（路径或内置名称）"""
        print("测试势函数解析...")

        config = SweepConfig(base_dir=self.tmp)
        self.assertTrue(resolve_potential(None, config).is_zero)
        self.assertAlmostEqual(resolve_potential('unit', config).l1_norm(), 1.0, places=14)

        with open(os.path.join(self.tmp, 'local.pot'), 'w', encoding='utf-8') as f:
            f.write("piece 0 0.5 const 2 0\n")
        self.assertAlmostEqual(resolve_potential('local.pot', config).evaluate(0.25), 2.0)

        with self.assertRaises(ConfigError):
            resolve_potential('no_such_potential', config)

        print("✓ 势函数解析测试通过")

    def test_forward_free_potential(self):
        """测试 q ≡ 0 的正问题得到空零点文件，且输出可重复"""
        print("测试自由正问题...")

        config = load_sweep_config(write_config(self.tmp, potential_true='zero', R_list=[30.0]))
        outcome = cmd_forward(config)
        self.assertEqual(len(outcome['zeros']), 0)

        zero_path = os.path.join(self.tmp, 'out', 'forward', 'zeros', 'zeros.txt')
        self.assertTrue(os.path.isfile(zero_path))
        zs = read_zero_file(zero_path)
        self.assertEqual(len(zs), 0)
        self.assertEqual(zs.R, 30.0)

        profile = pd.read_csv(os.path.join(self.tmp, 'out', 'forward', 'reports', 'jost_profile.csv'))
        np.testing.assert_allclose(profile['psi_re'] + 1j * profile['psi_im'],
                                   np.exp(1j * profile['x']), atol=1e-10)

        manifest_path = os.path.join(self.tmp, 'out', 'forward', 'session_manifest.json')
        with open(manifest_path, 'r', encoding='utf-8') as f:
            manifest = json.load(f)
        self.assertEqual(manifest['session_info']['command'], 'forward')
        self.assertEqual(manifest['file_structure']['zeros']['files'], ['zeros.txt'])

        first = [read_bytes(p) for p in (zero_path, manifest_path)]
        cmd_forward(config)
        self.assertEqual([read_bytes(p) for p in (zero_path, manifest_path)], first)

        print("✓ 自由正问题测试通过")

    def test_forward_requires_true_potential(self):
        """测试缺少 potential_true 时报配置错误"""
        print("测试缺少真实势函数...")

        config = load_sweep_config(write_config(self.tmp, R_list=[30.0]))
        with self.assertRaises(ConfigError):
            cmd_forward(config)
        with self.assertRaises(ConfigError):
            cmd_reconstruct(config)

        print("✓ 缺少真实势函数测试通过")

    def test_reconstruct_matches_sweep(self):
        """测试 ε = 0 时 reconstruct 命令与扫描的对应单元一致"""
        print("测试重构与扫描一致...")

        config = load_sweep_config(write_config(
            self.tmp, potential_true='half', R_list=[30.0], eps_list=[0.0], h=1.0 / 32,
            target_mode='reference', seed=3))
        cmd_forward(config)
        outcome = cmd_reconstruct(config)
        result = outcome['result']
        self.assertIsNotNone(result.sup_error())

        csv_path = os.path.join(self.tmp, 'out', 'reconstruct', 'reconstruction', 'reconstruction.csv')
        frame = pd.read_csv(csv_path, comment='#')
        self.assertEqual(len(frame), 33)
        np.testing.assert_allclose(frame['est_re'], result.estimate.values.real, rtol=0, atol=1e-15)

        sweep = cmd_sweep(config)['report']
        self.assertEqual(len(sweep), 1)
        self.assertEqual(sweep.rows['status'].iloc[0], 'ok')
        self.assertAlmostEqual(float(sweep.rows['empirical_sup_error'].iloc[0]), result.sup_error(), places=10)

        report_csv = os.path.join(self.tmp, 'out', 'sweep', 'sweeps', 'stability_report.csv')
        self.assertEqual(list(pd.read_csv(report_csv).columns),
                         ['R', 'eps', 'empirical_sup_error', 'envelope', 'fitted_C', 'status'])

        print(f"✓ 重构与扫描一致测试通过 (sup 误差 {result.sup_error():.3e})")

    def test_reconstruct_missing_zero_file(self):
        """测试零点文件缺失"""
        print("测试零点文件缺失...")

        config = load_sweep_config(write_config(self.tmp, potential_true='half', R_list=[30.0]))
        with self.assertRaises(ConfigError):
            cmd_reconstruct(config)

        print("✓ 零点文件缺失测试通过")

    def test_kernels_command(self):
        """测试核命令的诊断量"""
        print("测试核命令...")

        config = load_sweep_config(write_config(self.tmp, potential_true='half', R_list=[30.0], h=1.0 / 32))
        diagnostics = cmd_kernels(config)['diagnostics']
        self.assertLess(diagnostics['diagonal_error'], 1e-12)
        self.assertLess(diagnostics['composition_residual'], 1e-14)
        self.assertTrue(diagnostics['support_vanishing'])
        self.assertGreater(diagnostics['K_tilde_sup'], 0.0)

        kernel_dir = os.path.join(self.tmp, 'out', 'kernels', 'kernels')
        self.assertEqual(sorted(os.listdir(kernel_dir)), ['B.txt', 'K_ref.txt', 'K_tilde.txt', 'L_ref.txt'])

        print("✓ 核命令测试通过")

    def test_zeros_command(self):
        """测试计数函数不超过 Jensen 上界"""
        print("测试零点计数命令...")

        config = load_sweep_config(write_config(self.tmp, potential_true='half', R_list=[10.0]))
        counting = cmd_zeros(config)['counting']
        self.assertEqual(len(counting), 39)
        self.assertTrue(bool(counting['within_bound'].all()))
        self.assertTrue(np.all(np.diff(counting['N'].to_numpy()) >= 0))

        print("✓ 零点计数命令测试通过")

    def test_bound_command(self):
        """测试包络值"""
        print("测试包络值...")

        values = cmd_bound(1000.0, 0.0, 2.0)
        self.assertAlmostEqual(values['theorem31_envelope'], 0.1, places=12)
        self.assertAlmostEqual(values['rho'], 10.0, places=10)
        self.assertEqual(values['perturbation_term'], 0.0)
        self.assertEqual(values['theorem61_envelope'], values['theorem53_envelope'])
        self.assertAlmostEqual(values['nu'], 1.0 / 12.0, places=15)

        print("✓ 包络值测试通过")

    def test_jsonable(self):
        """测试诊断字典的 JSON 转换"""
        print("测试 JSON 转换...")

        data = _jsonable({'c0': 1 + 2j, 'x': np.float64(0.5), 'n': np.int64(3), 'inf': math.inf,
                          'nested': {'z': 3j}, 'text': 'ok'})
        self.assertEqual(data['c0'], [1.0, 2.0])
        self.assertEqual(data['x'], 0.5)
        self.assertEqual(data['n'], 3)
        self.assertEqual(data['inf'], 'inf')
        self.assertEqual(data['nested'], {'z': [0.0, 3.0]})
        json.dumps(data)

        print("✓ JSON 转换测试通过")

    def test_file_manager(self):
        """测试文件管理器与会话清单"""
        print("测试文件管理器...")

        manager = ExperimentFileManager(os.path.join(self.tmp, 'files'))
        with SessionContext(manager, 'demo', {'seed': 1}) as session:
            session.save_file('reports', 'table.csv', pd.DataFrame({'a': [1, 2]}))
            session.save_file('reports', 'info.json', {'b': 2})
            session.save_file('zeros', 'note.txt', 'hello')
            with self.assertRaises(ValueError):
                session.get_file_path('figures', 'x.png')
        self.assertEqual(len(session.saved), 3)
        with open(session.saved[0], 'rb') as f:
            self.assertEqual(f.read(), b"a\n1\n2\n")

        sessions = manager.list_sessions()
        self.assertEqual([s['command'] for s in sessions], ['demo'])

        with self.assertRaises(RuntimeError):
            with SessionContext(manager, 'broken') as broken:
                raise RuntimeError("boom")
        with open(os.path.join(broken.session_dir, 'session_manifest.json'), 'r', encoding='utf-8') as f:
            self.assertEqual(json.load(f)['metadata']['error'], 'RuntimeError: boom')

        print("✓ 文件管理器测试通过")

    def test_cli_exit_codes(self):
        """测试命令行退出码"""
        print("测试命令行退出码...")

        self.assertEqual(cli_main(['bound', '--R', '1000']), EXIT_OK)
        self.assertEqual(cli_main(['bound']), EXIT_CONFIG)
        self.assertEqual(cli_main(['bound', '--R', '1000', '--eps', '0.8']), EXIT_CONFIG)
        self.assertEqual(cli_main(['forward', '--config', os.path.join(self.tmp, 'missing.yaml')]),
                         EXIT_CONFIG)

        path = write_config(self.tmp, potential_true='zero', R_list=[30.0], h=1.0 / 16)
        out = os.path.join(self.tmp, 'cli_out')
        self.assertEqual(cli_main(['reconstruct', '--config', path, '--out', out]), EXIT_CONFIG)
        for command in ('forward', 'reconstruct', 'kernels', 'sweep'):
            self.assertEqual(cli_main([command, '--config', path, '--out', out]), EXIT_OK, command)
        self.assertTrue(os.path.isfile(os.path.join(out, 'forward', 'zeros', 'zeros.txt')))
        self.assertEqual(cli_main(['bound', '--config', path]), EXIT_OK)

        with self.assertRaises(SystemExit):
            cli_main(['unknown'])

        print("✓ 命令行退出码测试通过")


def run_tests():
    """运行所有测试"""
    print("实验编排与命令行测试")
    print("="*60)

    suite = unittest.TestLoader().loadTestsFromTestCase(TestHarness)
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
