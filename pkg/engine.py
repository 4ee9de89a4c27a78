#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
迭代插值（II）调度优化引擎
包含II主循环、Fourier逐层（Δp=1）基线、线性斜坡基线，
以及带评估次数硬上限的无导数系数优化器
"""

import logging
import math
import time
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np
import pandas as pd
from scipy.optimize import minimize

from errors import ConfigError, InvalidInputError
from metrics import approximation_ratio, expected_merit_factor, time_to_solution
from problems import ProblemKind
from schedule import BasisKind, angles_to_coeffs, coeffs_to_angles, interpolate, linear_schedule
from simulator import expectation, ground_overlap, run_qaoa

logger = logging.getLogger('engine')

# 默认初始化斜坡：γ从0线性增大，β线性减小到0
DEFAULT_RAMP = {"a_gamma": 0.0, "b_gamma": 0.7, "a_beta": 0.0, "b_beta": 0.7}

# p0处扫描的斜坡幅度倍数(γ倍数, β倍数)
RAMP_GRID = tuple((g, b) for g in (0.25, 0.5, 1.0, 2.0, 4.0) for b in (0.5, 1.0))

# 起始能量绝对值低于该值时相对改进按0处理
DEGENERATE_REFERENCE = 1e-12

SUPPORTED_METHODS = ("Nelder-Mead", "COBYQA", "COBYLA")

TRACE_COLUMNS = ["stage", "p", "C", "f_evals", "start_energy", "best_energy", "delta_perf",
                 "ar", "overlap", "tts", "mf", "tnl_cumulative", "patience", "degraded", "status"]


class TerminalStatus(Enum):
    REACHED_PMAX = "ReachedPMax"
    REACHED_TARGET = "ReachedTarget"
    BUDGET_EXHAUSTED = "BudgetExhausted"


class CoefficientMode(Enum):
    """patience：按耐心参数增长C；full：每个深度优化全部p个系数（Zhou策略）"""
    PATIENCE = "patience"
    FULL = "full"


@dataclass(frozen=True)
class OptimizerSettings:
    """无导数局部优化器设置，每阶段上限为 evals_per_parameter × 参数个数"""
    method: str = "Nelder-Mead"
    xatol: float = 1e-4
    fatol: float = 1e-6
    evals_per_parameter: int = 200
    initial_step: float = 0.05
    adaptive: bool = True

    def stage_cap(self, dimension):
        return self.evals_per_parameter * dimension


@dataclass(frozen=True)
class IIConfig:
    p0: int = 3
    delta_p: int = 5
    p_max: int = 2000
    epsilon: float = 1e-3
    c0: int = 2
    c_step: int = 2
    tau: int = 5
    ar_target: float = None
    overlap_target: float = None
    eval_budget: int = 40000
    basis: BasisKind = BasisKind.LEGENDRE
    optimizer: OptimizerSettings = field(default_factory=OptimizerSettings)
    seed: int = 0
    coeff_mode: CoefficientMode = CoefficientMode.PATIENCE
    gamma_scale: str = "spectrum"
    scan_ramp: bool = True
    rescaled_start: bool = True

    def validate(self):
        """检查全部约束，一次性报告所有问题"""
        problems = []
        if self.p0 < 1:
            problems.append(f"p0必须至少为1（当前{self.p0}）")
        if self.p0 > self.p_max:
            problems.append(f"p0={self.p0}不能大于p_max={self.p_max}")
        if self.delta_p < 1:
            problems.append(f"delta_p必须至少为1（当前{self.delta_p}）")
        if self.c0 < 1:
            problems.append(f"c0必须至少为1（当前{self.c0}）")
        if self.c_step < 0:
            problems.append(f"c_step不能为负（当前{self.c_step}）")
        if self.tau < 1:
            problems.append(f"tau必须至少为1（当前{self.tau}）")
        if self.eval_budget < 1:
            problems.append(f"eval_budget必须至少为1（当前{self.eval_budget}）")
        if self.ar_target is not None and self.overlap_target is not None:
            problems.append("ar_target与overlap_target最多只能设置一个")
        for name in ("ar_target", "overlap_target"):
            value = getattr(self, name)
            if value is not None and not 0.0 <= value <= 1.0:
                problems.append(f"{name}必须在[0,1]内（当前{value}）")
        if not isinstance(self.basis, BasisKind):
            problems.append(f"未知的基函数类型: {self.basis}")
        elif self.basis is BasisKind.LINEAR and self.c0 > 2:
            problems.append("linear基最多2个系数，c0不能大于2")
        if self.gamma_scale not in ("unit", "spectrum"):
            problems.append(f"gamma_scale必须为unit或spectrum（当前{self.gamma_scale}）")
        if self.optimizer.method not in SUPPORTED_METHODS:
            problems.append(f"不支持的优化方法: {self.optimizer.method}")
        if self.optimizer.evals_per_parameter < 1:
            problems.append("evals_per_parameter必须至少为1")
        if problems:
            raise ConfigError(problems)
        return self

    def target(self):
        """返回(指标名, 阈值)或None"""
        if self.ar_target is not None:
            return "ar", self.ar_target
        if self.overlap_target is not None:
            return "overlap", self.overlap_target
        return None


class Objective:
    """QAOA能量目标函数，计数器是TNL统计的唯一来源"""

    def __init__(self, spectrum):
        self.spectrum = spectrum
        self.evaluations = 0
        self.evaluation_log = []

    def __call__(self, schedule):
        energy = expectation(run_qaoa(self.spectrum, schedule), self.spectrum)
        self.evaluations += 1
        self.evaluation_log.append(schedule.p)
        return energy

    def measure(self, schedule):
        """阶段结束时的指标读取，不计入评估次数"""
        state = run_qaoa(self.spectrum, schedule)
        energy = expectation(state, self.spectrum)
        return energy, approximation_ratio(energy, self.spectrum), ground_overlap(state, self.spectrum)


@dataclass
class SearchResult:
    x: np.ndarray
    value: float
    start_value: float
    evaluations: int
    degraded: bool = False


@dataclass
class StageResult:
    coefficients: object
    evals_used: int
    best_value: float
    start_value: float
    degraded: bool = False


@dataclass
class StageRecord:
    stage: int
    p: int
    C: int
    f_evals: int
    start_energy: float
    best_energy: float
    delta_perf: float
    ar: float
    overlap: float
    tts: float
    mf: float
    tnl_cumulative: int
    patience: int
    degraded: bool
    wall_time: float
    start_coefficients: object = None


@dataclass
class RunTrace:
    records: list = field(default_factory=list)
    terminal_status: TerminalStatus = None
    evaluation_log: list = field(default_factory=list)

    @property
    def tnl(self):
        return self.records[-1].tnl_cumulative if self.records else 0

    @property
    def final(self):
        return self.records[-1] if self.records else None

    def to_frame(self):
        """CSV用的表格，不含墙钟时间以保证重复运行逐字节一致"""
        rows = []
        for index, record in enumerate(self.records):
            last = index == len(self.records) - 1
            row = {column: getattr(record, column) for column in TRACE_COLUMNS[:-1]}
            row["degraded"] = int(record.degraded)
            row["status"] = self.terminal_status.value if last and self.terminal_status else "running"
            rows.append(row)
        return pd.DataFrame(rows, columns=TRACE_COLUMNS)

    def write_csv(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False, float_format="%.17g")


class _BudgetReached(Exception):
    pass


def _method_options(settings, x0, budget):
    if settings.method == "Nelder-Mead":
        simplex = np.vstack([x0, x0 + settings.initial_step * np.eye(x0.size)])
        return {"xatol": settings.xatol, "fatol": settings.fatol, "maxfev": budget,
                "adaptive": settings.adaptive, "initial_simplex": simplex}
    if settings.method == "COBYQA":
        return {"maxfev": budget, "initial_tr_radius": settings.initial_step,
                "final_tr_radius": settings.xatol}
    return {"maxiter": budget, "rhobeg": settings.initial_step, "tol": settings.xatol}


def minimize_derivative_free(fun, x0, budget, settings=None):
    """
    有界无导数局部优化，评估次数严格不超过budget
    返回SearchResult(最优点, 最优值, 起点值, 评估次数, 是否降级)；总是返回见过的最优点
    """
    settings = settings or OptimizerSettings()
    if budget < 1:
        raise InvalidInputError(f"评估预算必须至少为1，当前为{budget}")
    x0 = np.asarray(x0, dtype=np.float64)
    state = {"count": 0, "best_x": x0.copy(), "best_f": math.inf}

    def counted(x):
        if state["count"] >= budget:
            raise _BudgetReached()
        state["count"] += 1
        value = float(fun(x))
        if value < state["best_f"]:
            state["best_f"] = value
            state["best_x"] = np.array(x, dtype=np.float64)
        return value

    start_value = counted(x0)

    def tracked(x):
        # 初始单纯形的第一个顶点就是起点，不重复评估
        if np.array_equal(x, x0):
            return start_value
        return counted(x)

    degraded = False
    if budget > 1 and x0.size > 0:
        try:
            minimize(tracked, x0, method=settings.method, options=_method_options(settings, x0, budget))
        except _BudgetReached:
            logger.debug(f"阶段评估预算{budget}已用完")
        except Exception as e:
            logger.warning(f"优化器内部错误，返回当前最优点: {str(e)}")
            degraded = True
    return SearchResult(state["best_x"], state["best_f"], start_value, state["count"], degraded)


def optimize_coefficients(objective, cs, active, p, stage_budget, settings=None):
    """只优化前active对系数(u_j, v_j)，更高阶系数保持当前值"""
    if not 1 <= active <= cs.C:
        raise InvalidInputError(f"活跃系数个数必须在1到{cs.C}之间，当前为{active}")

    def energy_of(vector):
        return objective(coeffs_to_angles(cs.with_active(vector, active), p))

    x0 = cs.active_vector(active)
    search = minimize_derivative_free(energy_of, x0, stage_budget, settings)
    return StageResult(cs.with_active(search.x, active), search.evaluations, search.value,
                       search.start_value, search.degraded)


def relative_improvement(start_value, best_value):
    """δ_perf = (起始能量 − 最优能量)/|起始能量|"""
    if abs(start_value) < DEGENERATE_REFERENCE:
        return 0.0
    return (start_value - best_value) / abs(start_value)


def initialize_schedule(spectrum, p0, basis, c0=2, ramp=None, gamma_scale="unit"):
    """把默认线性斜坡拟合到所选基上，返回恰好c0个系数（超出可拟合部分补零）"""
    basis = BasisKind(basis)
    if p0 < 1:
        raise InvalidInputError(f"p0必须至少为1，当前为{p0}")
    values = dict(DEFAULT_RAMP, **(ramp or {}))
    scale = 1.0
    if gamma_scale == "spectrum":
        spread = float(np.std(spectrum.energies))
        scale = 1.0 / spread if spread > 0 else 1.0
    ramp_schedule = linear_schedule(values["a_beta"], values["b_beta"],
                                    values["a_gamma"] * scale, values["b_gamma"] * scale, p0)
    limit = basis.max_coefficients or c0
    fit_count = min(c0, p0, limit)
    cs, residual = angles_to_coeffs(ramp_schedule, basis, fit_count)
    logger.debug(f"初始化调度: N={spectrum.num_qubits}, basis={basis.value}, p0={p0}, "
                 f"C={c0}, 拟合残差={residual:.3e}")
    return cs.padded(min(c0, limit))


def scan_initial_ramp(objective, p0, basis, c0=2, gamma_scale="spectrum", ramp=None):
    """
    在p0处按RAMP_GRID缩放斜坡的γ与β幅度，各评估一次
    返回(能量最低的初始系数, 其能量, 评估次数)；评估计入objective
    """
    values = dict(DEFAULT_RAMP, **(ramp or {}))
    best_cs, best_energy = None, math.inf
    for gamma_factor, beta_factor in RAMP_GRID:
        scaled = {"a_gamma": values["a_gamma"] * gamma_factor, "b_gamma": values["b_gamma"] * gamma_factor,
                  "a_beta": values["a_beta"] * beta_factor, "b_beta": values["b_beta"] * beta_factor}
        cs = initialize_schedule(objective.spectrum, p0, basis, c0, ramp=scaled, gamma_scale=gamma_scale)
        energy = objective(coeffs_to_angles(cs, p0))
        if energy < best_energy:
            best_cs, best_energy = cs, energy
    logger.debug(f"斜坡幅度扫描: p0={p0}, 候选{len(RAMP_GRID)}个, 最低能量={best_energy:.6f}")
    return best_cs, best_energy, len(RAMP_GRID)


def choose_interpolated_start(objective, cs, previous_p, p):
    """
    新深度的起点：直接插值，或按previous_p/p缩放系数使总演化时间不变，取能量较低者
    返回(起点系数, 评估次数)；评估计入objective
    """
    candidates = (cs, cs.scaled(previous_p / p))
    energies = [objective(coeffs_to_angles(candidate, p)) for candidate in candidates]
    return candidates[int(np.argmin(energies))], len(candidates)


def _grown_count(count, config):
    limit = config.basis.max_coefficients
    grown = count + config.c_step
    return grown if limit is None else min(grown, limit)


def _target_reached(config, ar, overlap):
    target = config.target()
    if target is None:
        return False
    metric, threshold = target
    return (ar if metric == "ar" else overlap) >= threshold


def _make_record(objective, stage, p, active, result, delta, tnl, patience, started, start_cs, f_evals=None):
    schedule = coeffs_to_angles(result.coefficients, p)
    energy, ar, overlap = objective.measure(schedule)
    mf = math.nan
    if objective.spectrum.kind is ProblemKind.LABS:
        mf = expected_merit_factor(energy, objective.spectrum)
    return schedule, StageRecord(
        stage=stage, p=p, C=active, f_evals=result.evals_used if f_evals is None else f_evals,
        start_energy=result.start_value, best_energy=result.best_value, delta_perf=delta,
        ar=ar, overlap=overlap, tts=time_to_solution(p, min(overlap, 1.0)), mf=mf,
        tnl_cumulative=tnl, patience=patience, degraded=result.degraded,
        wall_time=time.perf_counter() - started, start_coefficients=start_cs)


def _run_stages(spectrum, config, label):
    """II与Fourier基线共用的逐阶段循环"""
    config.validate()
    settings = config.optimizer
    full = config.coeff_mode is CoefficientMode.FULL
    objective = Objective(spectrum)
    p = config.p0
    count = p if full else config.c0
    cs = initialize_schedule(spectrum, p, config.basis, count, gamma_scale=config.gamma_scale)
    # 起点选择的评估记入当前阶段
    extra_evals = 0
    if config.scan_ramp and config.eval_budget > len(RAMP_GRID):
        cs, _, extra_evals = scan_initial_ramp(objective, p, config.basis, count, config.gamma_scale)
    trace = RunTrace()
    schedule = interpolate(cs, p)
    previous_p = None
    patience = 0
    tnl = 0
    stage = 0
    logger.info(f"[{label}] 开始优化: N={spectrum.num_qubits}, basis={config.basis.value}, "
                f"p0={config.p0}, Δp={config.delta_p}, p_max={config.p_max}")

    while True:
        remaining = config.eval_budget - objective.evaluations
        if remaining <= 0:
            trace.terminal_status = TerminalStatus.BUDGET_EXHAUSTED
            break
        stage += 1
        if full:
            # 新的最高频分量以零振幅加入
            cs = cs.padded(p)
            count = p
        elif previous_p is not None and config.rescaled_start and remaining > 2:
            cs, extra_evals = choose_interpolated_start(objective, cs, previous_p, p)
            remaining = config.eval_budget - objective.evaluations
        active = min(count, cs.C)
        stage_budget = min(settings.stage_cap(2 * active), remaining)
        started = time.perf_counter()
        start_cs = cs
        result = optimize_coefficients(objective, cs, active, p, stage_budget, settings)
        cs = result.coefficients
        f_evals = result.evals_used + extra_evals
        extra_evals = 0
        delta = relative_improvement(result.start_value, result.best_value)
        grow = False
        if not full:
            patience = patience + 1 if delta < config.epsilon else 0
            grow = patience >= config.tau
        tnl += p * f_evals
        schedule, record = _make_record(objective, stage, p, active, result, delta, tnl,
                                        patience, started, start_cs, f_evals)
        trace.records.append(record)
        logger.info(f"[{label}] 阶段{stage}: p={p}, C={active}, 评估{f_evals}次, "
                    f"能量={result.best_value:.6f}, AR={record.ar:.4f}, 重叠度={record.overlap:.4f}, TNL={tnl}")
        if result.degraded:
            logger.warning(f"[{label}] 阶段{stage}优化器降级，保留起点附近的最优结果")

        if _target_reached(config, record.ar, record.overlap):
            trace.terminal_status = TerminalStatus.REACHED_TARGET
            break
        if grow:
            grown = _grown_count(count, config)
            if grown == count:
                logger.debug(f"[{label}] {config.basis.value}基已达到系数上限{count}，C保持不变")
            else:
                logger.debug(f"[{label}] 连续{config.tau}个阶段改进低于ε，系数个数增加到{grown}")
            count = grown
            cs = cs.padded(count)
            patience = 0
        if objective.evaluations >= config.eval_budget:
            trace.terminal_status = TerminalStatus.BUDGET_EXHAUSTED
            break
        if p + config.delta_p > config.p_max:
            trace.terminal_status = TerminalStatus.REACHED_PMAX
            break
        previous_p = p
        p += config.delta_p

    trace.evaluation_log = list(objective.evaluation_log)
    logger.info(f"[{label}] 结束: 状态={trace.terminal_status.value}, 最终p={schedule.p}, "
                f"总评估{objective.evaluations}次, TNL={trace.tnl}")
    return schedule, cs, trace


def ii_run(spectrum, config):
    """
    迭代插值：在当前深度优化前C个系数，连续tau个阶段相对改进低于epsilon时C增加c_step，
    然后插值到p + delta_p；超过p_max、达到目标或预算耗尽时停止
    scan_ramp在p0处扫描斜坡幅度，rescaled_start在每个新深度比较直接插值与保持总演化时间的缩放插值
    返回(最终调度, 最终系数, 运行轨迹)
    """
    return _run_stages(spectrum, config, "II")


def fourier_baseline_run(spectrum, config):
    """Zhou的Fourier策略：深度每次加1，优化全部p对系数，新频率分量从0开始"""
    fourier_config = replace(config, basis=BasisKind.FOURIER, delta_p=1, coeff_mode=CoefficientMode.FULL)
    schedule, _, trace = _run_stages(spectrum, fourier_config, "Fourier")
    return schedule, trace


def linear_baseline_run(spectrum, p, budget, settings=None, ramp=None, gamma_scale="unit"):
    """固定深度p，只优化(a_β, b_β, a_γ, b_γ)四个参数"""
    if p < 1:
        raise InvalidInputError(f"p必须至少为1，当前为{p}")
    objective = Objective(spectrum)
    cs = initialize_schedule(spectrum, p, BasisKind.LINEAR, 2, ramp=ramp, gamma_scale=gamma_scale)
    started = time.perf_counter()
    result = optimize_coefficients(objective, cs, cs.C, p, budget, settings or OptimizerSettings())
    schedule, record = _make_record(objective, 1, p, cs.C, result,
                                    relative_improvement(result.start_value, result.best_value),
                                    p * result.evals_used, 0, started, cs)
    status = TerminalStatus.BUDGET_EXHAUSTED if result.evals_used >= budget else TerminalStatus.REACHED_PMAX
    trace = RunTrace([record], status, list(objective.evaluation_log))
    logger.info(f"[Linear] p={p}, 评估{result.evals_used}次, 能量={result.best_value:.6f}, AR={record.ar:.4f}")
    return schedule, trace
