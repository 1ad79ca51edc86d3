"""
该模块是程序的运行入口，负责解析命令行、加载参数、启动日志管理线程并调用各个实验。子命令：

- classify：权函数类别判定
- kernel：再生核取值
- schatten：截断 Hankel 算子的 Schatten 范数
- mo：格点上的平均振荡剖面
- equivalence：三方等价性实验
- lemmas：辅助不等式检验
- lattice：格点生成与校验

退出码：0 成功；2 命令行或配置错误；3 数值计算失败（标准输出给出 JSON 错误记录）。
"""

" 内置模块 "
import argparse
import json
import logging
import os
import sys
from threading import Thread

" 第三方模块 "
import numpy as np

" 自定义模块 "
from errors import BergmanError, ConfigError
from geometry import lattice_generate, lattice_validate, save_lattice
from harness import json_default, run_equivalence, run_lemma_suite
from kernels import kernel_eval, normalized_kernel_norm
from logs import flush_logs
from logs_manager_thread import logs_manager_thread
from operators import hankel_gram, schatten_norm
from oscillation import global_variant, local_variant, mo_profile
from parameter import apply_overrides, load_parameter, save_parameter
from symbols import format_symbol, parse_symbol
from weights import classify, default_grid, format_weight, parse_weight
import global_vars

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERICAL = 3


def _print_json(obj) -> None:
    print(json.dumps(obj, indent=4, ensure_ascii=False, default=json_default))


def _complex(text: str) -> complex:
    try:
        return complex(text.replace(' ', '').replace('i', 'j'))
    except ValueError:
        raise ConfigError('z', f"无法解析复数 {text!r}，例如 0.5+0.2j")


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--config', help='参数文件（JSON），缺省时使用默认参数')
    parser.add_argument('--weights', nargs='+', help='覆盖 weights')
    parser.add_argument('--symbols', nargs='+', help='覆盖 symbols')
    parser.add_argument('--p', nargs='+', type=float, help='覆盖 p')
    parser.add_argument('--eta', nargs='+', type=float, help='覆盖 eta')
    parser.add_argument('--r', nargs='+', type=float, help='覆盖局部半径 r')
    parser.add_argument('--N', type=int, help='覆盖截断维数 N')
    parser.add_argument('--lattice-r', type=float, help='覆盖 lattice.r')
    parser.add_argument('--R-max', type=float, help='覆盖 lattice.R_max')
    parser.add_argument('--output', help='覆盖输出目录')
    parser.add_argument('--seed', type=int, help='覆盖随机种子')
    parser.add_argument('--workers', type=int, help='覆盖工作线程数')
    parser.add_argument('--save-config', help='把合并后的参数另存为 JSON')


# 命令行参数名到点分字段路径
OVERRIDES = {
    'weights': 'weights', 'symbols': 'symbols', 'p': 'p', 'eta': 'eta', 'r': 'r', 'N': 'N',
    'lattice_r': 'lattice.r', 'R_max': 'lattice.R_max', 'output': 'output', 'seed': 'seed',
    'workers': 'workers',
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='main.py', description='加权 Bergman 空间上 Hankel 算子与平均振荡的数值实验')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('classify', help='判定权函数的类别')
    p.add_argument('--weight', required=True)
    p.add_argument('--points', type=int, default=256, help='判定网格的点数')

    p = sub.add_parser('kernel', help='计算再生核 B^ω_z(ζ)')
    p.add_argument('--weight', required=True)
    p.add_argument('--z', required=True, type=_complex)
    p.add_argument('--zeta', type=_complex, help='缺省时取 ζ=z')
    p.add_argument('--eta', type=float, help='同时给出 ‖K^{η+2}_z‖_{A²_ω}')

    p = sub.add_parser('schatten', help='截断 Hankel 算子的 Schatten 范数')
    p.add_argument('--weight', required=True)
    p.add_argument('--symbol', required=True)
    p.add_argument('--p', nargs='+', type=float, default=[2.0])
    p.add_argument('--N', type=int, default=128)
    p.add_argument('--singular-values', action='store_true', help='输出全部奇异值')

    p = sub.add_parser('mo', help='格点上的平均振荡剖面')
    p.add_argument('--weight', required=True)
    p.add_argument('--symbol', required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument('--global-eta', type=float, help='整体平均振荡 MO_{ω,η}')
    group.add_argument('--local-r', type=float, help='局部平均振荡 MO_{ω,r}')
    p.add_argument('--p', nargs='+', type=float, default=[2.0])
    p.add_argument('--lattice-r', type=float, default=0.5)
    p.add_argument('--R-max', type=float, default=0.95)
    p.add_argument('--out', help='剖面 CSV 路径（同时写出 .json 摘要）')

    p = sub.add_parser('equivalence', help='三方等价性实验')
    _add_config_flags(p)

    p = sub.add_parser('lemmas', help='辅助不等式检验')
    _add_config_flags(p)

    p = sub.add_parser('lattice', help='生成并校验格点')
    p.add_argument('--r', type=float, default=0.5)
    p.add_argument('--R-max', type=float, default=0.995)
    p.add_argument('--max-points', type=int, default=200000)
    p.add_argument('--probes', type=int, default=4000)
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--out', help='格点 CSV 路径')
    return parser


def _config_from(args):
    config = load_parameter(args.config)
    overrides = {dotted: getattr(args, name) for name, dotted in OVERRIDES.items()}
    config = apply_overrides(config, overrides)
    if args.save_config:
        save_parameter(config, args.save_config)
    return config


def cmd_classify(args) -> int:
    w = parse_weight(args.weight)
    if args.points < 16:
        raise ConfigError('points', f"判定网格至少需要 16 个点，收到 {args.points}")
    _print_json(classify(w, default_grid(args.points)))
    return EXIT_OK


def cmd_kernel(args) -> int:
    w = parse_weight(args.weight)
    zeta = args.z if args.zeta is None else args.zeta
    value = kernel_eval(w, args.z, zeta)
    out = {'weight': format_weight(w), 'z': args.z, 'zeta': zeta, 'value': value.value, 'bound': value.bound,
           'terms': value.terms}
    if args.eta is not None:
        out['eta'] = args.eta
        out['standard_kernel_norm'] = normalized_kernel_norm(w, args.eta, args.z)
    _print_json(out)
    return EXIT_OK


def cmd_schatten(args) -> int:
    w = parse_weight(args.weight)
    f = parse_symbol(args.symbol)
    if not 1 <= args.N <= 512:
        raise ConfigError('N', f"N 必须在 [1,512] 内，收到 {args.N}")
    gram = hankel_gram(f, w, args.N)
    reports = []
    for p in args.p:
        if not p > 0:
            raise ConfigError('p', f"p 必须为正数，收到 {p}")
        rep = schatten_norm(gram, p).to_dict()
        if not args.singular_values:
            rep.pop('singular_values')
        reports.append(rep)
    _print_json({'weight': format_weight(w), 'symbol': format_symbol(f), 'N': args.N,
                 'norm': reports[0]['norm_p'], 'reports': reports})
    return EXIT_OK


def cmd_mo(args) -> int:
    w = parse_weight(args.weight)
    f = parse_symbol(args.symbol)
    variant = global_variant(args.global_eta) if args.global_eta is not None else local_variant(args.local_r)
    if not 0 < args.R_max < 1:
        raise ConfigError('R_max', f"截断半径必须在 (0,1) 内，收到 {args.R_max}")
    lattice = lattice_generate(args.lattice_r, args.R_max)
    profile = mo_profile(f, w, variant, lattice, args.p, args.R_max)
    if args.out:
        profile.to_csv(args.out)
    _print_json({'weight': format_weight(w), 'symbol': format_symbol(f), 'variant': variant.label,
                 'points': len(lattice), 'max': float(np.max(profile.values)) if profile.values.size else 0.0,
                 'p_norms': profile.p_norms})
    return EXIT_OK


def cmd_equivalence(args) -> int:
    config = _config_from(args)
    report = _with_logs(config.output, run_equivalence, config)
    _print_json({'output': config.output, 'rows': len(report['rows']), 'failures': report['failures'],
                 'all_agree': report['all_agree'], 'ratio_bracket': report['ratio_bracket']})
    return EXIT_OK if report['failures'] == 0 else EXIT_NUMERICAL


def cmd_lemmas(args) -> int:
    config = _config_from(args)
    report = _with_logs(config.output, run_lemma_suite, config)
    _print_json({'output': config.output, 'failures': report['failures'], 'lattice': report['lattice']})
    return EXIT_OK if report['failures'] == 0 else EXIT_NUMERICAL


def cmd_lattice(args) -> int:
    if not 0 < args.R_max < 1:
        raise ConfigError('R_max', f"截断半径必须在 (0,1) 内，收到 {args.R_max}")
    lattice = lattice_generate(args.r, args.R_max, args.max_points)
    result = lattice_validate(lattice.points, args.r, args.R_max, args.probes, args.seed)
    if args.out:
        save_lattice(lattice, args.out)
    _print_json({'r': args.r, 'R_max': args.R_max} | result)
    return EXIT_OK


COMMANDS = {
    'classify': cmd_classify,
    'kernel': cmd_kernel,
    'schatten': cmd_schatten,
    'mo': cmd_mo,
    'equivalence': cmd_equivalence,
    'lemmas': cmd_lemmas,
    'lattice': cmd_lattice,
}


def _with_logs(output: str, func, *args):
    """
    在输出目录中启动日志管理线程运行 func，结束后把剩余日志写完。
    """
    os.makedirs(output, exist_ok=True)
    global_vars.log_path = os.path.join(output, 'run.log')
    global_vars.s_finished_event.clear()
    logs_thread = Thread(target=logs_manager_thread, kwargs={'log_path': global_vars.log_path, 'fq': 100})
    logs_thread.start()
    try:
        return func(*args)
    finally:
        global_vars.s_finished_event.set()
        logs_thread.join()


def cli_main(argv: list[str]) -> int:
    """
    命令行入口，返回退出码。
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse 在 --help 时以 0 退出
        return EXIT_OK if e.code == 0 else EXIT_USAGE

    global_vars.lq.push(('程序状态', 'Info', f'开始运行子命令 {args.command}'))
    try:
        return COMMANDS[args.command](args)
    except ConfigError as e:
        print(f"配置错误 {e}", file=sys.stderr)
        _print_json({'error': {'kind': 'ConfigError', 'field': e.field, 'message': e.message}})
        return EXIT_USAGE
    except OSError as e:
        # 输出路径不可写、目录不存在等，按配置错误处理
        err = ConfigError('output', str(e))
        print(f"配置错误 {err}", file=sys.stderr)
        _print_json({'error': {'kind': 'ConfigError', 'field': err.field, 'message': err.message}})
        return EXIT_USAGE
    except BergmanError as e:
        _print_json({'error': {'kind': type(e).__name__, 'message': str(e)}})
        return EXIT_NUMERICAL
    finally:
        _drain_logs()


def _drain_logs() -> None:
    # 子命令不一定启动日志管理线程，剩下的日志直接交给 logging
    while len(global_vars.lq) > 0:
        if not flush_logs(global_vars.lq, None, 100):
            break


if __name__ == '__main__':
    logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(levelname)s - %(message)s')
    sys.exit(cli_main(sys.argv[1:]))
