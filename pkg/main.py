"""
共振数据反演实验室主程序
Resonance Inverse Problem Laboratory Main Entry

命令行入口：forward | zeros | kernels | reconstruct | sweep | bound
退出码：0 成功，2 配置错误，3 数值失败
"""

import argparse
import os
import sys
import time
from typing import List, Optional

# 添加src目录到Python路径
current_dir = os.path.dirname(os.path.abspath(__file__))
src_dir = os.path.join(current_dir, 'src')
sys.path.insert(0, src_dir)

from src.experiments.harness import COMMANDS, cmd_bound, load_sweep_config, setup_logging
from src.utils.exceptions import ConfigError, NumericalError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def print_header(command: str):
    """打印程序头部信息"""
    print("=" * 80)
    print(" " * 25 + "共振数据反演实验室")
    print(" " * 18 + "Resonance Inverse Problem Laboratory")
    print("=" * 80)
    print(f"命令: {command}")
    print("-" * 80)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='resolab',
        description='由 Jost 函数零点重构紧支撑势函数的稳定性实验')
    sub = parser.add_subparsers(dest='command', required=True)

    descriptions = {
        'forward': '求 potential_true 的零点并写出零点文件',
        'zeros': '以 3iρ 为圆心计数零点并与 Jensen 上界比较',
        'kernels': '计算并转储变换核网格',
        'reconstruct': '由零点文件重构尾积分',
        'sweep': '(R, ε) 稳定性扫描',
    }
    for name, help_text in descriptions.items():
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument('--config', required=True, help='实验配置 YAML 文件')
        cmd.add_argument('--out', default=None, help='输出目录（覆盖配置中的 out_dir）')

    bound = sub.add_parser('bound', help='打印包络值')
    bound.add_argument('--config', default=None, help='实验配置（提供缺省的 R、eps、p）')
    bound.add_argument('--out', default=None, help='未使用，保持各子命令参数一致')
    bound.add_argument('--R', type=float, default=None, help='圆盘半径')
    bound.add_argument('--eps', type=float, default=None, help='零点扰动水平')
    bound.add_argument('--p', type=float, default=None, help='Lp 指数')
    return parser


def run_bound(args) -> None:
    R, eps, p = args.R, args.eps, args.p
    if args.config is not None:
        config = load_sweep_config(args.config)
        if R is None and config.R_list:
            R = config.R_max
        if eps is None and config.eps_list:
            eps = config.eps_list[0]
        if p is None:
            p = config.p
    if R is None:
        raise ConfigError("bound 需要 --R 或带 R_list 的 --config")
    cmd_bound(R, 0.0 if eps is None else eps, 2.0 if p is None else p)


def main(argv: Optional[List[str]] = None) -> int:
    """主程序函数，返回退出码"""
    args = build_parser().parse_args(argv)
    print_header(args.command)
    start_time = time.time()
    try:
        if args.command == 'bound':
            run_bound(args)
        else:
            config = load_sweep_config(args.config, args.out)
            setup_logging(config.system_config)
            COMMANDS[args.command](config)
    except ConfigError as e:
        print(f"❌ 配置错误: {e}")
        return EXIT_CONFIG
    except NumericalError as e:
        print(f"❌ 数值计算失败: {e}")
        return EXIT_NUMERICAL
    except ValueError as e:
        # 参数越界（如 eps ≥ 3/4、p ∉ (1, 2]）
        print(f"❌ 参数错误: {e}")
        return EXIT_CONFIG

    print(f"\n✅ 完成，用时 {time.time() - start_time:.2f} 秒")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
