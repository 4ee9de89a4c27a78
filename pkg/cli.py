#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
实验运行器
生成实例、运行II与两种基线、按规模和种子批量扫描、拟合深度标度律，
所有结果都写成CSV/JSON文件，供作图脚本直接读取
"""

import argparse
import copy
import datetime
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, fields, replace
from enum import Enum
from pathlib import Path

import numpy as np
import pandas as pd

from engine import (SUPPORTED_METHODS, CoefficientMode, IIConfig, Objective, OptimizerSettings,
                    TerminalStatus, fourier_baseline_run, ii_run, linear_baseline_run)
from errors import ConfigError, InvalidInputError, QAOAIIError
from metrics import (FitModel, MetricKind, ar_convention, depth_to_threshold, fit_scaling,
                     tnl_to_threshold)
from problems import DEFAULT_MAX_QUBITS, ProblemKind, build_spectrum, load_spectrum, save_spectrum
from schedule import (BasisKind, angles_to_coeffs, coeffs_to_angles, read_schedule,
                      write_coefficients, write_schedule)
from simulator import run_qaoa, save_statevector

logger = logging.getLogger('cli')

METHODS = ("ii", "fourier", "linear")

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_INPUT_ERROR = 2
EXIT_BUDGET_EXHAUSTED = 3

SWEEP_COLUMNS = ["problem", "N", "seed", "method", "metric", "threshold", "depth_to_threshold",
                 "tnl_at_target", "ar_final", "overlap_final", "tts_final", "mf_final", "status", "error"]

FIT_MODELS = ("powerlaw", "exponential", "both")

INSTANCE_DIR = "instances"
TRACE_DIR = "traces"
SWEEP_FILE = "sweep.csv"
FIT_FILE = "fit.json"
FIT_PLOT_FILE = "fit_plot.csv"


def _plain(value):
    return value.value if isinstance(value, Enum) else value


DEFAULT_CONFIG = {
    "problem": {
        "kind": "sk",
        "sizes": [8],
        "seeds": [0],
        "k": None,
        "q": 0.5,
        "penalty_weight": None,
        "max_qubits": DEFAULT_MAX_QUBITS,
    },
    "engine": {f.name: _plain(getattr(IIConfig(), f.name)) for f in fields(IIConfig) if f.name != "optimizer"},
    "optimizer": {f.name: getattr(OptimizerSettings(), f.name) for f in fields(OptimizerSettings)},
    "experiment": {
        "method": "ii",
        "p": 10,
        "metric": "overlap",
        "thresholds": [],
        "model": "both",
        "out_dir": "results",
        "workers": 1,
    },
    "data": {
        "logs_directory": "logs",
    },
}

# key=value配置文件和命令行参数到结构化配置的映射
KEY_PATHS = {
    "problem": ("problem", "kind"),
    "kind": ("problem", "kind"),
    "n": ("problem", "sizes"),
    "sizes": ("problem", "sizes"),
    "seeds": ("problem", "seeds"),
    "k": ("problem", "k"),
    "q": ("problem", "q"),
    "penalty_weight": ("problem", "penalty_weight"),
    "max_qubits": ("problem", "max_qubits"),
    "optimizer": ("optimizer", "method"),
    "xatol": ("optimizer", "xatol"),
    "fatol": ("optimizer", "fatol"),
    "evals_per_parameter": ("optimizer", "evals_per_parameter"),
    "initial_step": ("optimizer", "initial_step"),
    "adaptive": ("optimizer", "adaptive"),
    "method": ("experiment", "method"),
    "p": ("experiment", "p"),
    "metric": ("experiment", "metric"),
    "thresholds": ("experiment", "thresholds"),
    "model": ("experiment", "model"),
    "out_dir": ("experiment", "out_dir"),
    "workers": ("experiment", "workers"),
    "logs_directory": ("data", "logs_directory"),
}
KEY_PATHS.update({name: ("engine", name) for name in DEFAULT_CONFIG["engine"]})


def _deep_merge(base, override):
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def _parse_scalar(text):
    text = text.strip()
    try:
        return json.loads(text)
    except ValueError:
        return text


def read_key_value_config(path):
    """读取key=value格式的配置文件（#开头为注释），返回结构化配置片段"""
    nested = {}
    problems = []
    with open(path, 'r', encoding='utf-8') as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line or line.startswith('#'):
                continue
            if '=' not in line:
                problems.append(f"第{lineno}行缺少'=': {line}")
                continue
            key, value = line.split('=', 1)
            key = key.strip().replace('-', '_')
            if key not in KEY_PATHS:
                problems.append(f"第{lineno}行的未知配置项: {key}")
                continue
            section, name = KEY_PATHS[key]
            nested.setdefault(section, {})[name] = _parse_scalar(value)
    if problems:
        raise ConfigError(problems)
    return nested


def parse_int_list(value, name):
    """'10,12,14'、'0..9'或列表形式的整数序列"""
    if value is None:
        return ()
    if isinstance(value, (list, tuple)):
        items = value
    elif isinstance(value, int):
        items = [value]
    else:
        items = []
        for part in str(value).split(','):
            part = part.strip()
            if not part:
                continue
            if '..' in part:
                low, high = part.split('..', 1)
                items.extend(range(int(low), int(high) + 1))
            else:
                items.append(part)
    try:
        return tuple(int(item) for item in items)
    except (TypeError, ValueError) as e:
        raise ConfigError([f"{name}无法解析为整数列表: {value}"]) from e


def parse_float_list(value, name):
    if value is None:
        return ()
    items = value if isinstance(value, (list, tuple)) else [value]
    if isinstance(value, str):
        items = [part for part in value.split(',') if part.strip()]
    try:
        return tuple(float(item) for item in items)
    except (TypeError, ValueError) as e:
        raise ConfigError([f"{name}无法解析为数值列表: {value}"]) from e


def _optional(value, cast):
    return None if value is None else cast(value)


@dataclass(frozen=True)
class ExperimentConfig:
    """一次实验的完整配置，(配置, N, 种子)唯一确定一次运行"""
    problem: ProblemKind
    sizes: tuple
    seeds: tuple
    engine: IIConfig
    methods: tuple = ("ii",)
    cardinality: int = None
    risk_tradeoff: float = 0.5
    penalty_weight: float = None
    max_qubits: int = DEFAULT_MAX_QUBITS
    p: int = 10
    metric: MetricKind = MetricKind.OVERLAP
    thresholds: tuple = ()
    model: str = "both"
    out_dir: str = "results"
    workers: int = 1

    def validate(self):
        problems = []
        try:
            self.engine.validate()
        except ConfigError as e:
            problems.extend(e.problems)
        if not self.sizes:
            problems.append("问题规模列表不能为空")
        if not self.seeds:
            problems.append("种子列表不能为空")
        if not self.methods:
            problems.append("至少需要一种方法")
        for method in self.methods:
            if method not in METHODS:
                problems.append(f"未知的方法: {method}（可选{', '.join(METHODS)}）")
        if self.workers < 1:
            problems.append(f"workers必须至少为1（当前{self.workers}）")
        if self.p < 1:
            problems.append(f"p必须至少为1（当前{self.p}）")
        for threshold in self.thresholds:
            if not 0.0 <= threshold <= 1.0:
                problems.append(f"阈值必须在[0,1]内（当前{threshold}）")
        if self.model not in FIT_MODELS:
            problems.append(f"未知的拟合模型: {self.model}")
        if problems:
            raise ConfigError(problems)
        return self

    def seeds_for_problem(self):
        # LABS每个N只有一个实例
        return self.seeds[:1] if self.problem is ProblemKind.LABS else self.seeds

    def fit_models(self):
        if self.model == "both":
            return (FitModel.POWER_LAW, FitModel.EXPONENTIAL)
        return (FitModel(self.model),)


def build_experiment_config(config):
    """由合并后的字典构造并校验ExperimentConfig"""
    problem = config["problem"]
    engine = config["engine"]
    optimizer = config["optimizer"]
    experiment = config["experiment"]
    try:
        settings = OptimizerSettings(
            method=str(optimizer["method"]),
            xatol=float(optimizer["xatol"]),
            fatol=float(optimizer["fatol"]),
            evals_per_parameter=int(optimizer["evals_per_parameter"]),
            initial_step=float(optimizer["initial_step"]),
            adaptive=bool(optimizer["adaptive"]),
        )
        ii_config = IIConfig(
            p0=int(engine["p0"]),
            delta_p=int(engine["delta_p"]),
            p_max=int(engine["p_max"]),
            epsilon=float(engine["epsilon"]),
            c0=int(engine["c0"]),
            c_step=int(engine["c_step"]),
            tau=int(engine["tau"]),
            ar_target=_optional(engine["ar_target"], float),
            overlap_target=_optional(engine["overlap_target"], float),
            eval_budget=int(engine["eval_budget"]),
            basis=BasisKind(engine["basis"]),
            optimizer=settings,
            seed=int(engine["seed"]),
            coeff_mode=CoefficientMode(engine["coeff_mode"]),
            gamma_scale=str(engine["gamma_scale"]),
            scan_ramp=bool(engine["scan_ramp"]),
            rescaled_start=bool(engine["rescaled_start"]),
        )
        methods = experiment["method"]
        if isinstance(methods, str):
            methods = [m.strip() for m in methods.split(',') if m.strip()]
        result = ExperimentConfig(
            problem=ProblemKind(problem["kind"]),
            sizes=parse_int_list(problem["sizes"], "sizes"),
            seeds=parse_int_list(problem["seeds"], "seeds"),
            engine=ii_config,
            methods=tuple(methods),
            cardinality=_optional(problem["k"], int),
            risk_tradeoff=float(problem["q"]),
            penalty_weight=_optional(problem["penalty_weight"], float),
            max_qubits=int(problem["max_qubits"]),
            p=int(experiment["p"]),
            metric=MetricKind(experiment["metric"]),
            thresholds=parse_float_list(experiment["thresholds"], "thresholds"),
            model=str(experiment["model"]),
            out_dir=str(experiment["out_dir"]),
            workers=int(experiment["workers"]),
        )
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError([f"配置项取值错误: {str(e)}"]) from e
    return result.validate()


def engine_for_job(config, seed):
    """单次运行的引擎配置：种子写入IIConfig；未显式设置目标时以最大阈值作为停止目标"""
    engine = replace(config.engine, seed=seed)
    if engine.target() is None and config.thresholds:
        name = "ar_target" if config.metric is MetricKind.AR else "overlap_target"
        engine = replace(engine, **{name: max(config.thresholds)})
    return engine


def report_thresholds(config, engine):
    """(指标, 阈值序列)，决定汇总表中每次运行展开成几行"""
    if config.thresholds:
        return config.metric, tuple(sorted(config.thresholds))
    target = engine.target()
    if target is not None:
        return MetricKind(target[0]), (target[1],)
    return config.metric, ()


def instance_name(kind, n, seed):
    return f"labs_n{n}" if kind is ProblemKind.LABS else f"{kind.value}_n{n}_s{seed}"


def _parameter_tag(value):
    return "auto" if value is None else f"{value:g}"


def instance_file(config, n, seed):
    """实例谱文件路径；投资组合的K、q、λ写进文件名，参数不同的实例互不覆盖"""
    name = instance_name(config.problem, n, seed)
    if config.problem is ProblemKind.PORTFOLIO:
        name += (f"_k{_parameter_tag(config.cardinality)}_q{_parameter_tag(config.risk_tradeoff)}"
                 f"_l{_parameter_tag(config.penalty_weight)}")
    return Path(config.out_dir) / INSTANCE_DIR / f"{name}.qspc"


def run_name(kind, n, seed, method):
    return f"{instance_name(kind, n, seed)}_{method}"


def _matches(spectrum, config, n, seed):
    if spectrum.num_qubits != n or spectrum.kind is not config.problem:
        return False
    # LABS每个N只有一个实例，不比较种子
    return config.problem is ProblemKind.LABS or spectrum.seed == seed


def obtain_spectrum(config, n, seed, workers=1):
    """优先读取generate写出的实例文件，不存在或与(配置, N, seed)不一致时现场构造"""
    path = instance_file(config, n, seed)
    if path.is_file():
        spectrum = load_spectrum(path)
        if _matches(spectrum, config, n, seed):
            logger.debug(f"使用已有实例文件: {path}")
            return spectrum
        logger.warning(f"实例文件{path}与当前配置不一致，重新构造")
    return build_spectrum(config.problem, n, seed, cardinality=config.cardinality,
                          risk_tradeoff=config.risk_tradeoff, penalty_weight=config.penalty_weight,
                          max_qubits=config.max_qubits, workers=workers)


def execute_method(spectrum, method, engine, p):
    """返回(最终调度, 最终系数或None, 运行轨迹)"""
    if method == "ii":
        return ii_run(spectrum, engine)
    if method == "fourier":
        schedule, trace = fourier_baseline_run(spectrum, engine)
        return schedule, None, trace
    schedule, trace = linear_baseline_run(spectrum, p, engine.eval_budget, engine.optimizer,
                                          gamma_scale=engine.gamma_scale)
    return schedule, None, trace


def trace_rows(config, trace, base, metric, thresholds):
    final = trace.final
    rows = []
    for threshold in thresholds or (math.nan,):
        reached = not math.isnan(threshold)
        rows.append(dict(
            base,
            threshold=threshold,
            depth_to_threshold=depth_to_threshold(trace, metric, threshold) if reached else None,
            tnl_at_target=tnl_to_threshold(trace, metric, threshold) if reached else None,
            ar_final=final.ar,
            overlap_final=final.overlap,
            tts_final=final.tts,
            mf_final=final.mf,
            status=trace.terminal_status.value,
            error="",
        ))
    return rows


def run_sweep_job(job):
    """进程池中执行的单次运行，异常写入结果行而不中断扫描"""
    config, n, seed, method = job
    engine = engine_for_job(config, seed)
    metric, thresholds = report_thresholds(config, engine)
    base = {"problem": config.problem.value, "N": n, "seed": seed, "method": method, "metric": metric.value}
    try:
        spectrum = obtain_spectrum(config, n, seed)
        _, _, trace = execute_method(spectrum, method, engine, config.p)
        trace.write_csv(Path(config.out_dir) / TRACE_DIR / f"{run_name(config.problem, n, seed, method)}_trace.csv")
    except Exception as e:
        logger.error(f"运行失败: N={n}, seed={seed}, method={method}: {str(e)}")
        return [dict(base, threshold=threshold, status="error", error=str(e))
                for threshold in thresholds or (math.nan,)]
    logger.info(f"完成: N={n}, seed={seed}, method={method}, 状态={trace.terminal_status.value}, "
                f"AR={trace.final.ar:.4f}, 重叠度={trace.final.overlap:.4f}, TNL={trace.tnl}")
    return trace_rows(config, trace, base, metric, thresholds)


def sweep_table(rows):
    """按(N, seed, method, threshold)排序后的长表，与并行度无关"""
    table = pd.DataFrame(rows, columns=SWEEP_COLUMNS)
    table = table.sort_values(["N", "seed", "method", "threshold"], kind="mergesort")
    return table.reset_index(drop=True)


def fit_table(table, models=(FitModel.POWER_LAW, FitModel.EXPONENTIAL)):
    """
    对每个(method, metric, threshold)分组：按N取达到阈值深度的中位数后拟合标度律
    返回(拟合记录列表, 作图数据表)；有效的N少于3个时抛出InvalidInputError
    """
    table = table.copy()
    for column in ("N", "depth_to_threshold"):
        if column not in table.columns:
            raise InvalidInputError(f"结果表缺少列: {column}")
    for column, default in (("method", "ii"), ("metric", MetricKind.OVERLAP.value), ("threshold", math.nan)):
        if column not in table.columns:
            table[column] = default
    table["depth_to_threshold"] = pd.to_numeric(table["depth_to_threshold"], errors="coerce")

    records = []
    frames = []
    errors = []
    for (method, metric, threshold), group in table.groupby(["method", "metric", "threshold"],
                                                              dropna=False, sort=True):
        per_n = (group.groupby("N", sort=True)["depth_to_threshold"]
                 .agg(runs="size", successes="count", p_median="median").reset_index())
        per_n["failures"] = per_n["runs"] - per_n["successes"]
        per_n["failure_fraction"] = per_n["failures"] / per_n["runs"]
        reached = per_n[per_n["successes"] > 0]
        points = list(zip(reached["N"].astype(float), reached["p_median"].astype(float)))
        failures = int(per_n["failures"].sum())
        try:
            fits = [replace(fit_scaling(points, model), failures=failures) for model in models]
        except InvalidInputError as e:
            logger.error(f"[{method} {metric}≥{threshold}] 无法拟合: {str(e)}")
            errors.append(e)
            continue
        for fit in fits:
            per_n[f"p_fit_{fit.model.value}"] = fit.predict(per_n["N"].to_numpy(dtype=float))
            logger.info(f"[{method} {metric}≥{threshold}] {fit.model.value}: a={fit.a:.6g}, "
                        f"b={fit.b:.6g}, R²={fit.r_squared:.4f}")
        per_n.insert(0, "threshold", threshold)
        per_n.insert(0, "metric", metric)
        per_n.insert(0, "method", method)
        frames.append(per_n.drop(columns=["successes"]))
        records.append({
            "method": method,
            "metric": metric,
            "threshold": None if pd.isna(threshold) else float(threshold),
            "failures": failures,
            "fits": [fit.to_record() for fit in fits],
        })
    if not frames:
        if errors:
            raise errors[0]
        raise InvalidInputError("结果表为空，无法拟合")
    return records, pd.concat(frames, ignore_index=True)


def compress_schedule(schedule, spectrum, basis, count):
    """用前count个基系数重建原始调度，比较重建前后的能量、AR与重叠度"""
    cs, residual = angles_to_coeffs(schedule, basis, count)
    reconstructed = coeffs_to_angles(cs, schedule.p)
    objective = Objective(spectrum)
    report = {
        "basis": cs.kind.value,
        "C": cs.C,
        "p": schedule.p,
        "residual": residual,
        "magnitudes": np.hypot(cs.u, cs.v).tolist(),
    }
    for label, candidate in (("original", schedule), ("reconstructed", reconstructed)):
        energy, ar, overlap = objective.measure(candidate)
        report[label] = {"energy": energy, "ar": ar, "overlap": overlap}
    return cs, report


class ExperimentRunner:
    def __init__(self, config_file=None, overrides=None, debug=False):
        # 保存调试模式标志
        self.debug_mode = debug

        # 默认配置 < 配置文件 < 命令行参数
        self.config = self.load_config(config_file)
        self.apply_overrides(overrides or {})
        self.settings = build_experiment_config(self.config)
        self.out_dir = Path(self.settings.out_dir)

        self.log_file = None
        self.log_handler = None
        self.initialize_logging()
        self.create_directories()

    def load_config(self, config_file):
        """加载JSON或key=value配置文件并合并到默认配置上；文件不可读时使用默认配置"""
        if config_file is None:
            if not Path('config.json').is_file():
                return copy.deepcopy(DEFAULT_CONFIG)
            config_file = 'config.json'
        try:
            with open(config_file, 'r', encoding='utf-8') as f:
                text = f.read()
            if str(config_file).endswith('.json') or text.lstrip().startswith('{'):
                loaded = json.loads(text)
            else:
                loaded = read_key_value_config(config_file)
            return _deep_merge(DEFAULT_CONFIG, loaded)
        except ConfigError:
            raise
        except Exception as e:
            logger.error(f"加载配置文件失败，使用默认配置: {str(e)}")
            return copy.deepcopy(DEFAULT_CONFIG)

    def apply_overrides(self, overrides):
        for name, value in overrides.items():
            if value is None or name not in KEY_PATHS:
                continue
            section, key = KEY_PATHS[name]
            self.config[section][key] = value
        if overrides.get("seed") is not None:
            self.config["problem"]["seeds"] = [overrides["seed"]]

    def create_directories(self):
        for directory in (self.out_dir, self.out_dir / INSTANCE_DIR, self.out_dir / TRACE_DIR):
            directory.mkdir(parents=True, exist_ok=True)

    def initialize_logging(self):
        """在日志目录下为本次运行创建单独的日志文件"""
        try:
            log_dir = Path(self.config["data"]["logs_directory"])
            log_dir.mkdir(parents=True, exist_ok=True)
            current_time = datetime.datetime.now().strftime("%Y%m%d_%H%M%S")
            self.log_file = log_dir / f"qaoa_ii_{current_time}.log"
            with open(self.log_file, 'a', encoding='utf-8') as f:
                f.write(f"===== QAOA迭代插值实验日志 - {datetime.datetime.now().strftime('%Y-%m-%d %H:%M:%S')} =====\n")
            self.log_handler = logging.FileHandler(self.log_file, encoding='utf-8')
            self.log_handler.setFormatter(logging.Formatter('[%(asctime)s] [%(levelname)s] %(message)s',
                                                            datefmt='%Y-%m-%d %H:%M:%S'))
            logging.getLogger().addHandler(self.log_handler)
        except Exception as e:
            logger.error(f"初始化日志系统失败: {str(e)}")
            self.log_file = None
            self.log_handler = None

    def close(self):
        if self.log_handler is not None:
            logging.getLogger().removeHandler(self.log_handler)
            self.log_handler.close()
            self.log_handler = None

    # ------------------------------------------------------------ 子命令

    def generate(self):
        """为每个(N, seed)写出谱文件，返回写出的路径列表"""
        settings = self.settings
        paths = []
        for n in settings.sizes:
            for seed in settings.seeds_for_problem():
                spectrum = build_spectrum(settings.problem, n, seed, cardinality=settings.cardinality,
                                          risk_tradeoff=settings.risk_tradeoff,
                                          penalty_weight=settings.penalty_weight,
                                          max_qubits=settings.max_qubits, workers=settings.workers)
                path = instance_file(settings, n, seed)
                save_spectrum(path, spectrum)
                paths.append(path)
                logger.info(f"已生成实例: {path}（e_min={spectrum.e_min:.6f}, 基态数={len(spectrum.ground_set)}）")
        return paths

    def run(self, dump_state=False):
        """逐个(N, seed, method)运行并写出轨迹CSV、调度文件与元数据，返回退出码"""
        settings = self.settings
        exit_code = EXIT_OK
        for n in settings.sizes:
            for seed in settings.seeds_for_problem():
                spectrum = obtain_spectrum(settings, n, seed, workers=settings.workers)
                for method in settings.methods:
                    engine = engine_for_job(settings, seed)
                    schedule, cs, trace = execute_method(spectrum, method, engine, settings.p)
                    prefix = self.out_dir / run_name(settings.problem, n, seed, method)
                    trace.write_csv(f"{prefix}_trace.csv")
                    write_schedule(f"{prefix}_schedule.txt", schedule)
                    if cs is not None:
                        write_coefficients(f"{prefix}_coefficients.txt", cs, schedule.p)
                    if dump_state:
                        save_statevector(f"{prefix}_state.bin", run_qaoa(spectrum, schedule))
                    self._write_metadata(f"{prefix}_meta.json", spectrum, n, seed, method, schedule, trace)
                    logger.info(f"[{method}] N={n}, seed={seed}: 状态={trace.terminal_status.value}, "
                                f"p={schedule.p}, AR={trace.final.ar:.4f}, 重叠度={trace.final.overlap:.4f}")
                    if trace.terminal_status is TerminalStatus.BUDGET_EXHAUSTED:
                        exit_code = EXIT_BUDGET_EXHAUSTED
        return exit_code

    def _write_metadata(self, path, spectrum, n, seed, method, schedule, trace):
        metadata = {
            "problem": self.settings.problem.value,
            "N": n,
            "seed": seed,
            "method": method,
            "basis": self.settings.engine.basis.value,
            "ar_convention": ar_convention(spectrum.kind or self.settings.problem),
            "e_min": spectrum.e_min,
            "e_max": spectrum.e_max,
            "terminal_status": trace.terminal_status.value,
            "final_p": schedule.p,
            "tnl": trace.tnl,
            "evaluations": len(trace.evaluation_log),
        }
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(metadata, f, ensure_ascii=False, indent=2)

    def sweep(self):
        """全部(N, seed, method)组合分发到进程池，汇总后写出长表"""
        settings = self.settings
        jobs = [(settings, n, seed, method)
                for n in settings.sizes
                for seed in settings.seeds_for_problem()
                for method in settings.methods]
        logger.info(f"开始扫描: {len(jobs)}次运行, {settings.workers}个进程")
        rows = []
        if settings.workers == 1:
            for job in jobs:
                rows.extend(run_sweep_job(job))
        else:
            with ProcessPoolExecutor(max_workers=settings.workers) as executor:
                futures = {executor.submit(run_sweep_job, job): job for job in jobs}
                for future in as_completed(futures):
                    _, n, seed, method = futures[future]
                    try:
                        rows.extend(future.result())
                    except Exception as e:
                        logger.error(f"工作进程异常: N={n}, seed={seed}, method={method}: {str(e)}")
                        rows.append({"problem": settings.problem.value, "N": n, "seed": seed,
                                     "method": method, "status": "error", "error": str(e)})
        table = sweep_table(rows)
        path = self.out_dir / SWEEP_FILE
        table.to_csv(path, index=False, float_format="%.17g")
        failed = int((table["status"] == "error").sum())
        logger.info(f"扫描完成: {len(table)}行结果写入{path}，失败{failed}行")
        return table

    def fit(self, input_path=None):
        """读取扫描结果表，写出拟合JSON和作图数据CSV"""
        input_path = Path(input_path) if input_path else self.out_dir / SWEEP_FILE
        table = pd.read_csv(input_path)
        records, plot_data = fit_table(table, self.settings.fit_models())
        with open(self.out_dir / FIT_FILE, 'w', encoding='utf-8') as f:
            json.dump(records, f, ensure_ascii=False, indent=2)
        plot_data.to_csv(self.out_dir / FIT_PLOT_FILE, index=False, float_format="%.17g")
        logger.info(f"拟合结果已写入{self.out_dir / FIT_FILE}与{self.out_dir / FIT_PLOT_FILE}")
        return records, plot_data

    def compress(self, schedule_path, count):
        """把原始调度压缩为count个基系数，报告重建误差与性能变化"""
        settings = self.settings
        schedule = read_schedule(schedule_path)
        spectrum = obtain_spectrum(settings, settings.sizes[0], settings.seeds_for_problem()[0],
                                   workers=settings.workers)
        cs, report = compress_schedule(schedule, spectrum, settings.engine.basis, count)
        stem = Path(schedule_path).stem
        write_coefficients(self.out_dir / f"{stem}_{cs.kind.value}_C{count}.txt", cs, schedule.p)
        with open(self.out_dir / f"{stem}_{cs.kind.value}_C{count}.json", 'w', encoding='utf-8') as f:
            json.dump(report, f, ensure_ascii=False, indent=2)
        logger.info(f"调度压缩: p={schedule.p} → C={count}, 残差={report['residual']:.3e}, "
                    f"AR {report['original']['ar']:.4f} → {report['reconstructed']['ar']:.4f}")
        return cs, report


def build_parser():
    parser = argparse.ArgumentParser(description='QAOA调度迭代插值优化实验')
    parser.add_argument('-d', '--debug', action='store_true', help='启用调试模式，输出详细日志信息')

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('-d', '--debug', action='store_true', default=argparse.SUPPRESS,
                        help='启用调试模式')
    common.add_argument('--config', help='JSON或key=value配置文件')
    common.add_argument('--out-dir', help='输出目录')
    common.add_argument('--workers', type=int, help='并行进程数')
    common.add_argument('--problem', choices=[k.value for k in ProblemKind], help='问题类型')
    common.add_argument('--n', help="问题规模，如'8'、'10,12,14'或'10..14'")
    common.add_argument('--seeds', help="实例种子列表，如'0..9'")
    common.add_argument('--seed', type=int, help='单个实例种子')
    common.add_argument('--k', type=int, help='投资组合的资产个数约束K')
    common.add_argument('--q', type=float, help='投资组合的风险权衡系数q')
    common.add_argument('--penalty-weight', type=float, help='投资组合约束罚项系数λ')
    common.add_argument('--max-qubits', type=int, help='量子比特数上限')
    common.add_argument('--p0', type=int, help='起始深度')
    common.add_argument('--delta-p', type=int, help='深度步长')
    common.add_argument('--p-max', type=int, help='最大深度')
    common.add_argument('--epsilon', type=float, help='相对改进阈值ε')
    common.add_argument('--c0', type=int, help='初始系数个数')
    common.add_argument('--c-step', type=int, help='系数个数增量')
    common.add_argument('--tau', type=int, help='耐心参数τ')
    common.add_argument('--ar-target', type=float, help='目标近似比')
    common.add_argument('--overlap-target', type=float, help='目标基态重叠度')
    common.add_argument('--eval-budget', type=int, help='总评估次数上限')
    common.add_argument('--basis', choices=[b.value for b in BasisKind], help='调度基函数')
    common.add_argument('--coeff-mode', choices=[m.value for m in CoefficientMode], help='系数增长方式')
    common.add_argument('--gamma-scale', choices=["unit", "spectrum"], help='初始γ斜坡的缩放方式')
    common.add_argument('--optimizer', choices=list(SUPPORTED_METHODS), help='无导数优化器')
    common.add_argument('--method', help="方法，可用逗号分隔多个: ii,fourier,linear")
    common.add_argument('--p', type=int, help='线性基线的固定深度')
    common.add_argument('--metric', choices=[m.value for m in MetricKind], help='阈值对应的指标')
    common.add_argument('--thresholds', help="阈值列表，如'0.25,0.3,0.35'")
    common.add_argument('--model', choices=list(FIT_MODELS), help='标度拟合模型')

    subparsers = parser.add_subparsers(dest='command', required=True)
    subparsers.add_parser('generate', parents=[common], help='生成实例谱文件')
    run_parser = subparsers.add_parser('run', parents=[common], help='运行优化并写出轨迹')
    run_parser.add_argument('--dump-state', action='store_true', help='同时写出最终态矢量')
    subparsers.add_parser('sweep', parents=[common], help='批量扫描规模、种子与方法')
    fit_parser = subparsers.add_parser('fit', parents=[common], help='拟合深度标度律')
    fit_parser.add_argument('--input', help='扫描结果CSV（默认<out-dir>/sweep.csv）')
    compress_parser = subparsers.add_parser('compress', parents=[common], help='用少量基系数压缩调度')
    compress_parser.add_argument('--schedule', required=True, help='原始调度文件')
    compress_parser.add_argument('--count', type=int, required=True, help='保留的系数个数')
    return parser


def main(argv=None):
    """命令行入口，返回进程退出码"""
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.debug else logging.INFO,
                        format='[%(asctime)s] [%(levelname)s] %(message)s',
                        datefmt='%Y-%m-%d %H:%M:%S')
    runner = None
    try:
        runner = ExperimentRunner(args.config, vars(args), debug=args.debug)
        if args.command == 'generate':
            runner.generate()
            return EXIT_OK
        if args.command == 'run':
            return runner.run(dump_state=args.dump_state)
        if args.command == 'sweep':
            runner.sweep()
            return EXIT_OK
        if args.command == 'fit':
            runner.fit(args.input)
            return EXIT_OK
        runner.compress(args.schedule, args.count)
        return EXIT_OK
    except ConfigError as e:
        for problem in e.problems:
            logger.error(f"配置错误: {problem}")
        return EXIT_INPUT_ERROR
    except (QAOAIIError, OSError) as e:
        logger.error(f"{args.command}失败: {str(e)}")
        return EXIT_INPUT_ERROR
    except Exception as e:
        logger.error(f"程序运行出错: {str(e)}")
        import traceback
        traceback.print_exc()
        return EXIT_UNEXPECTED
    finally:
        if runner is not None:
            runner.close()


if __name__ == "__main__":
    sys.exit(main())
