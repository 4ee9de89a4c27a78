#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
性能指标测试
"""

import math
import sys

import numpy as np

from engine import RunTrace, StageRecord, TerminalStatus
from errors import EmptySummaryError, InvalidInputError
from metrics import (FitModel, aggregate_tnl, approximation_ratio, depth_to_threshold,
                     expected_merit_factor, fit_scaling, time_to_solution, tnl_to_threshold,
                     total_layers)
from problems import CostSpectrum, ProblemKind, build_labs_spectrum


def _record(stage, p, f_evals, tnl, ar, overlap):
    return StageRecord(stage=stage, p=p, C=2, f_evals=f_evals, start_energy=0.0, best_energy=0.0,
                       delta_perf=0.0, ar=ar, overlap=overlap, tts=math.nan, mf=math.nan,
                       tnl_cumulative=tnl, patience=0, degraded=False, wall_time=0.0)


def _trace(overlaps):
    records = []
    tnl = 0
    for stage, overlap in enumerate(overlaps, start=1):
        p = 3 + 5 * (stage - 1)
        tnl += p * 10
        records.append(_record(stage, p, 10, tnl, overlap, overlap))
    return RunTrace(records, TerminalStatus.REACHED_PMAX)


def test_labs_approximation_ratio_is_merit_factor_ratio():
    spectrum = CostSpectrum.from_energies([2.0, 4.0, 6.0, 8.0], ProblemKind.LABS)
    assert approximation_ratio(4.0, spectrum) == 0.5
    assert approximation_ratio(2.0, spectrum) == 1.0
    assert abs(expected_merit_factor(2.0, CostSpectrum.from_energies(np.full(32, 2.0))) - 6.25) < 1e-12


def test_minimization_approximation_ratio():
    spectrum = CostSpectrum.from_energies([-1.0, 0.0, 1.0, 3.0], ProblemKind.SK)
    assert approximation_ratio(-1.0, spectrum) == 1.0
    assert approximation_ratio(3.0, spectrum) == 0.0
    assert approximation_ratio(1.0, spectrum) == 0.5
    constant = CostSpectrum.from_energies([2.0, 2.0], ProblemKind.SK)
    assert approximation_ratio(2.0, constant) == 1.0


def test_approximation_ratio_is_scale_invariant():
    portfolio = CostSpectrum.from_energies([-1.5, -0.25, 0.5, 2.0], ProblemKind.PORTFOLIO)
    labs = build_labs_spectrum(7)
    cases = ((portfolio, (-1.2, 0.0, 1.7)),
             (labs, (labs.e_min, float(np.mean(labs.energies)), 0.5 * (labs.e_min + labs.e_max))))
    for spectrum, energies in cases:
        for factor in (0.5, 2.0, 10.0):
            scaled = spectrum.scaled(factor)
            for energy in energies:
                expected = approximation_ratio(energy, spectrum)
                assert abs(expected - approximation_ratio(factor * energy, scaled)) < 1e-12, (factor, energy)


def test_approximation_ratio_rejects_energy_outside_spectrum():
    spectrum = CostSpectrum.from_energies([0.0, 1.0], ProblemKind.SK)
    try:
        approximation_ratio(1.5, spectrum)
    except InvalidInputError:
        return
    raise AssertionError("超出谱范围的能量应被拒绝")


def test_time_to_solution():
    assert time_to_solution(10, 0.5) == 20.0
    assert time_to_solution(10, 0.0) == math.inf
    try:
        time_to_solution(1, 1.5)
    except InvalidInputError:
        return
    raise AssertionError("重叠度大于1应被拒绝")


def test_total_layers():
    assert total_layers({3: 10, 8: 5}) == 70
    assert total_layers({}) == 0


def test_power_law_fit_recovers_constants():
    n = np.arange(8, 21)
    fit = fit_scaling(zip(n, 0.18 * n ** 1.46), FitModel.POWER_LAW)
    assert abs(fit.a - 0.18) < 1e-6
    assert abs(fit.b - 1.46) < 1e-6
    assert abs(fit.r_squared - 1.0) < 1e-12
    assert np.allclose(fit.predict(n), 0.18 * n ** 1.46)


def test_exponential_fit_recovers_constants():
    n = np.arange(6, 15)
    fit = fit_scaling(zip(n, 2.0 * 1.23 ** n), "exponential")
    assert fit.model is FitModel.EXPONENTIAL
    assert abs(fit.a - 2.0) < 1e-6
    assert abs(fit.b - 1.23) < 1e-6
    assert fit.to_record()["n_points"] == 9


def test_power_law_beats_exponential_on_power_law_data():
    n = np.array([10, 12, 14, 16, 18])
    depths = 0.18 * n ** 1.46
    power = fit_scaling(zip(n, depths), FitModel.POWER_LAW)
    exponential = fit_scaling(zip(n, depths), FitModel.EXPONENTIAL)
    assert power.r_squared >= exponential.r_squared


def test_fit_preconditions():
    for points in ([(10, 5.0), (12, 6.0)], [(10, 5.0), (12, 0.0), (14, 7.0)],
                   [(10, 5.0), (10, 6.0), (12, 7.0)]):
        try:
            fit_scaling(points, FitModel.POWER_LAW)
        except InvalidInputError:
            continue
        raise AssertionError(f"{points}应被拒绝")


def test_depth_and_tnl_to_threshold_use_first_hit():
    trace = _trace([0.1, 0.3, 0.2, 0.6])
    assert depth_to_threshold(trace, "overlap", 0.25) == 8
    assert tnl_to_threshold(trace, "overlap", 0.25) == 30 + 80
    assert depth_to_threshold(trace, "ar", 0.9) is None
    assert tnl_to_threshold(trace, "overlap", 0.9) is None


def test_depth_to_threshold_is_monotone_in_threshold():
    trace = _trace([0.05, 0.3, 0.2, 0.45, 0.4, 0.7])
    previous_depth = 0
    for threshold in np.linspace(0.0, 0.7, 15):
        depth = depth_to_threshold(trace, "overlap", threshold)
        assert depth is not None and depth >= previous_depth, (threshold, depth)
        previous_depth = depth
    assert depth_to_threshold(trace, "overlap", 0.71) is None


def test_aggregate_tnl_ignores_trace_order():
    traces = [_trace([0.1, 0.3]), _trace([0.5]), _trace([0.1, 0.1, 0.4]), _trace([0.0]), _trace([0.2, 0.26])]
    reference = aggregate_tnl(traces, "overlap", 0.25)
    rng = np.random.default_rng(3)
    for _ in range(10):
        shuffled = [traces[i] for i in rng.permutation(len(traces))]
        assert aggregate_tnl(shuffled, "overlap", 0.25) == reference


def test_aggregate_tnl_counts_failures():
    traces = [_trace([0.1, 0.3]), _trace([0.5]), _trace([0.1, 0.1, 0.4]), _trace([0.0])]
    summary = aggregate_tnl(traces, "overlap", 0.25)
    assert summary.successes == 3 and summary.failures == 1
    assert summary.median == 110.0
    assert summary.p10 <= summary.median <= summary.p90
    try:
        aggregate_tnl([_trace([0.1])], "overlap", 0.25)
    except EmptySummaryError:
        return
    raise AssertionError("全部失败时应报告空汇总")


if __name__ == "__main__":
    print("开始运行性能指标测试...")
    failed = 0
    for name, test in list(globals().items()):
        if name.startswith("test_") and callable(test):
            try:
                test()
                print(f"✓ {name}")
            except Exception as e:
                failed += 1
                print(f"✗ {name}: {str(e)}")
    sys.exit(0 if failed == 0 else 1)
