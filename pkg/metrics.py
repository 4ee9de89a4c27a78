#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
性能指标模块
近似比、求解时间、品质因子、达到阈值所需深度、多次运行的TNL汇总以及深度标度律拟合
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import stats

from errors import EmptySummaryError, InvalidInputError
from problems import ProblemKind, merit_factor_from_energy

logger = logging.getLogger('metrics')

# 期望能量允许超出[e_min, e_max]的相对容差
RANGE_TOLERANCE = 1e-9

PERCENTILE_BANDS = (10.0, 90.0)


class MetricKind(Enum):
    OVERLAP = "overlap"
    AR = "ar"


class FitModel(Enum):
    POWER_LAW = "powerlaw"
    EXPONENTIAL = "exponential"


@dataclass(frozen=True)
class ScalingFit:
    """p = a·N^b（幂律）或 p = a·b^N（指数），R²在对数空间计算"""
    model: FitModel
    a: float
    b: float
    r_squared: float
    points: tuple = field(default_factory=tuple)
    failures: int = 0

    def predict(self, n):
        n = np.asarray(n, dtype=np.float64)
        if self.model is FitModel.POWER_LAW:
            return self.a * np.power(n, self.b)
        return self.a * np.power(self.b, n)

    def to_record(self):
        """JSON输出用的字典"""
        return {
            "model": self.model.value,
            "a": self.a,
            "b": self.b,
            "r_squared": self.r_squared,
            "n_points": len(self.points),
            "failures": self.failures,
        }


@dataclass(frozen=True)
class TNLSummary:
    median: float
    p10: float
    p90: float
    successes: int
    failures: int


def approximation_ratio(expected_energy, spectrum, problem_kind=None):
    """
    LABS：AR = e_min/<E>，即MF(<E>)/MF_opt
    SK与投资组合（最小化）：AR = (e_max − <E>)/(e_max − e_min)
    """
    kind = ProblemKind(problem_kind) if problem_kind is not None else spectrum.kind
    tolerance = RANGE_TOLERANCE * max(1.0, abs(spectrum.e_min), abs(spectrum.e_max))
    if not spectrum.e_min - tolerance <= expected_energy <= spectrum.e_max + tolerance:
        raise InvalidInputError(
            f"期望能量{expected_energy}超出谱范围[{spectrum.e_min}, {spectrum.e_max}]")
    if kind is ProblemKind.LABS:
        ratio = spectrum.e_min / expected_energy
    elif spectrum.e_max == spectrum.e_min:
        ratio = 1.0
    else:
        ratio = (spectrum.e_max - expected_energy) / (spectrum.e_max - spectrum.e_min)
    return min(1.0, max(0.0, ratio))


def ar_convention(problem_kind):
    """写入输出元数据的AR定义说明"""
    if ProblemKind(problem_kind) is ProblemKind.LABS:
        return "e_min/<E> (merit-factor ratio)"
    return "(e_max-<E>)/(e_max-e_min)"


def expected_merit_factor(expected_energy, spectrum):
    """期望能量对应的品质因子，只对LABS有意义"""
    return merit_factor_from_energy(spectrum.num_qubits, expected_energy)


def time_to_solution(p, overlap):
    """TTS = p/|<x*|γ,β>|²，重叠度为0时返回无穷大"""
    if not 0.0 <= overlap <= 1.0 + 1e-12:
        raise InvalidInputError(f"重叠度必须在[0,1]内，当前为{overlap}")
    if overlap == 0.0:
        return math.inf
    return p / overlap


def total_layers(evaluation_counts):
    """TNL = Σ_i i·f_eval^i，参数为{深度: 评估次数}"""
    return sum(int(p) * int(count) for p, count in evaluation_counts.items())


def _metric_value(record, metric):
    return record.ar if MetricKind(metric) is MetricKind.AR else record.overlap


def _first_hit(trace, metric, threshold):
    for record in trace.records:
        if _metric_value(record, metric) >= threshold:
            return record
    return None


def depth_to_threshold(trace, metric, threshold):
    """指标首次达到阈值时的深度p，未达到返回None（失败实例）"""
    record = _first_hit(trace, metric, threshold)
    return None if record is None else record.p


def tnl_to_threshold(trace, metric, threshold):
    """指标首次达到阈值时的累计TNL，未达到返回None"""
    record = _first_hit(trace, metric, threshold)
    return None if record is None else record.tnl_cumulative


def fit_scaling(points, model):
    """
    对数空间线性最小二乘：幂律拟合log p ~ log N，指数拟合log p ~ N
    points为(N, p)序列，要求至少3个不同的N且全部为正
    """
    model = FitModel(model)
    data = np.asarray(list(points), dtype=np.float64)
    if data.ndim != 2 or data.shape[1] != 2 or data.shape[0] < 3:
        raise InvalidInputError("标度拟合至少需要3个(N, p)点")
    if np.any(data <= 0) or not np.all(np.isfinite(data)):
        raise InvalidInputError("标度拟合的N与p必须全部为正的有限值")
    if np.unique(data[:, 0]).shape[0] < 3:
        raise InvalidInputError("标度拟合至少需要3个不同的N")
    x = np.log(data[:, 0]) if model is FitModel.POWER_LAW else data[:, 0]
    y = np.log(data[:, 1])
    regression = stats.linregress(x, y)
    predicted = regression.intercept + regression.slope * x
    ss_res = float(np.sum((y - predicted) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r_squared = 1.0 if ss_tot == 0.0 else min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    a = float(np.exp(regression.intercept))
    b = float(regression.slope) if model is FitModel.POWER_LAW else float(np.exp(regression.slope))
    logger.debug(f"标度拟合: model={model.value}, a={a:.6g}, b={b:.6g}, R²={r_squared:.6f}")
    return ScalingFit(model, a, b, r_squared, tuple(map(tuple, data.tolist())))


def aggregate_tnl(traces, metric, threshold):
    """多个种子的TNL-到达目标汇总：中位数与10/90分位，失败的运行单独计数"""
    traces = list(traces)
    if not traces:
        raise InvalidInputError("至少需要一条运行轨迹")
    values = [tnl_to_threshold(trace, metric, threshold) for trace in traces]
    reached = sorted(v for v in values if v is not None)
    failures = len(values) - len(reached)
    if not reached:
        raise EmptySummaryError(f"全部{failures}次运行都未达到{MetricKind(metric).value} ≥ {threshold}")
    low, high = np.percentile(reached, PERCENTILE_BANDS)
    return TNLSummary(float(np.median(reached)), float(low), float(high), len(reached), failures)
