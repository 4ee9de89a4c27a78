#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
桌面规模验收实验
快速部分（模拟器对照、均匀态解析值、确定性与TNL记账、小规模LABS）总是运行；
耗时数分钟到数小时的实验只在设置 QAOA_II_SLOW=1 时运行，否则报告跳过
"""

import json
import os
import sys
import tempfile
import unittest
from collections import Counter
from dataclasses import replace
from pathlib import Path

import numpy as np

import cli
from engine import IIConfig, OptimizerSettings, TerminalStatus, fourier_baseline_run, ii_run
from metrics import FitModel, aggregate_tnl, depth_to_threshold, fit_scaling, total_layers
from problems import build_labs_spectrum, build_sk_spectrum, merit_factor_from_energy
from schedule import BasisKind
from simulator import Schedule, expectation, run_qaoa
from test_simulator import _dense_qaoa

SLOW = os.environ.get("QAOA_II_SLOW") == "1"

# Legendre基、τ=5、Δp=5，深度不超过200
LABS_CONFIG = IIConfig(basis=BasisKind.LEGENDRE, tau=5, delta_p=5, p_max=200, eval_budget=40000,
                       ar_target=0.95)
# 默认测试集里的小规模LABS
QUICK_LABS_CONFIG = replace(LABS_CONFIG, p_max=100, eval_budget=20000)
# SK实验的桌面规模设置
SK_DESK_CONFIG = IIConfig(p_max=100, eval_budget=10000, optimizer=OptimizerSettings(evals_per_parameter=100))


def _require_slow(name):
    if not SLOW:
        raise unittest.SkipTest(f"{name}（设置 QAOA_II_SLOW=1 以运行）")


def _check_labs(sizes, config):
    for n in sizes:
        spectrum = build_labs_spectrum(n)
        _, _, trace = ii_run(spectrum, config)
        final = trace.final
        print(f"  LABS N={n}: p={final.p}, C={final.C}, AR={final.ar:.4f}, 重叠度={final.overlap:.4f}, "
              f"最优MF={merit_factor_from_energy(n, spectrum.e_min):.4f}, TNL={trace.tnl}")
        assert trace.terminal_status is TerminalStatus.REACHED_TARGET, (n, trace.terminal_status)
        assert final.ar >= 0.95 and final.overlap >= 0.25, (n, final.ar, final.overlap)
        assert len(trace.evaluation_log) <= config.eval_budget and final.p <= config.p_max


def test_simulator_matches_dense_oracle_on_random_schedules():
    rng = np.random.default_rng(7)
    for n in range(2, 7):
        spectrum = build_sk_spectrum(n, 100 + n)
        for p in (1, 2, 3):
            worst = 0.0
            for _ in range(50):
                schedule = Schedule(rng.uniform(-np.pi, np.pi, p), rng.uniform(-np.pi, np.pi, p))
                deviation = np.max(np.abs(run_qaoa(spectrum, schedule).amplitudes - _dense_qaoa(spectrum, schedule)))
                worst = max(worst, deviation)
            assert worst < 1e-9, (n, p, worst)


def test_uniform_state_averages():
    zero = Schedule([0.0], [0.0])
    rng = np.random.default_rng(11)
    for seed in range(20):
        n = int(rng.integers(2, 15))
        spectrum = build_sk_spectrum(n, seed)
        assert abs(expectation(run_qaoa(spectrum, zero), spectrum)) < 1e-9, (n, seed)
    for n in range(2, 15):
        spectrum = build_labs_spectrum(n)
        assert abs(expectation(run_qaoa(spectrum, zero), spectrum) - n * (n - 1) / 2) < 1e-9, n


def test_sweeps_are_byte_identical_and_tnl_matches_log():
    outputs = []
    with tempfile.TemporaryDirectory() as tmp:
        config_file = Path(tmp) / "experiment.json"
        config_file.write_text(json.dumps({"data": {"logs_directory": str(Path(tmp) / "logs")}}), encoding="utf-8")
        for workers in (1, 3, 1):
            out_dir = Path(tmp) / f"w{workers}_{len(outputs)}"
            code = cli.main(["sweep", "--problem", "sk", "--n", "4,5,6", "--seeds", "0..2",
                             "--method", "ii,fourier", "--p0", "1", "--delta-p", "1", "--p-max", "8",
                             "--thresholds", "0.3", "--workers", str(workers),
                             "--out-dir", str(out_dir), "--config", str(config_file)])
            assert code == cli.EXIT_OK
            outputs.append((out_dir / cli.SWEEP_FILE).read_bytes())
    assert outputs[0] == outputs[1] == outputs[2]

    spectrum = build_sk_spectrum(6, 2)
    config = IIConfig(p0=1, delta_p=1, p_max=8, overlap_target=0.3)
    for trace in (ii_run(spectrum, config)[2], fourier_baseline_run(spectrum, config)[1]):
        assert trace.tnl == total_layers(Counter(trace.evaluation_log))
        assert trace.records[-1].tnl_cumulative == sum(trace.evaluation_log)


def test_small_labs_reaches_high_approximation_ratio():
    _check_labs(range(5, 9), QUICK_LABS_CONFIG)


def test_labs_reaches_high_approximation_ratio():
    _require_slow("LABS N=5..13")
    _check_labs(range(5, 14), LABS_CONFIG)


def test_ii_needs_fewer_layers_than_fourier():
    _require_slow("SK n=12 的II与Fourier对比")
    config = replace(SK_DESK_CONFIG, overlap_target=0.5)
    ii_traces = []
    fourier_traces = []
    for seed in range(20):
        spectrum = build_sk_spectrum(12, seed)
        ii_traces.append(ii_run(spectrum, config)[2])
        fourier_traces.append(fourier_baseline_run(spectrum, config)[1])
    ii_summary = aggregate_tnl(ii_traces, "overlap", 0.5)
    fourier_summary = aggregate_tnl(fourier_traces, "overlap", 0.5)
    ratio = fourier_summary.median / ii_summary.median
    print(f"  TNL中位数: II={ii_summary.median:.0f} (失败{ii_summary.failures}), "
          f"Fourier={fourier_summary.median:.0f} (失败{fourier_summary.failures}), 比值={ratio:.2f}")
    assert ratio >= 1.5


def test_sk_depth_scaling_prefers_power_law():
    _require_slow("SK n=10..16 标度律实验")
    config = replace(SK_DESK_CONFIG, overlap_target=0.25)
    points = []
    for n in (10, 12, 14, 16):
        depths = []
        for seed in range(10):
            _, _, trace = ii_run(build_sk_spectrum(n, seed), config)
            depth = depth_to_threshold(trace, "overlap", 0.25)
            if depth is not None:
                depths.append(depth)
        assert depths, n
        points.append((n, float(np.median(depths))))
        print(f"  SK n={n}: 深度中位数={points[-1][1]:.1f}, 成功{len(depths)}/10")
    power = fit_scaling(points, FitModel.POWER_LAW)
    exponential = fit_scaling(points, FitModel.EXPONENTIAL)
    print(f"  幂律: a={power.a:.4g}, b={power.b:.4g}, R²={power.r_squared:.4f}; "
          f"指数: a={exponential.a:.4g}, b={exponential.b:.4g}, R²={exponential.r_squared:.4f}")
    assert power.r_squared >= 0.9
    assert power.r_squared >= exponential.r_squared


if __name__ == "__main__":
    print("开始运行验收实验...")
    failed = 0
    skipped = 0
    for name, test in list(globals().items()):
        if name.startswith("test_") and callable(test):
            try:
                test()
                print(f"✓ {name}")
            except unittest.SkipTest as e:
                skipped += 1
                print(f"- {name}: 跳过{str(e)}")
            except Exception as e:
                failed += 1
                print(f"✗ {name}: {str(e)}")
    if skipped:
        print(f"跳过{skipped}项耗时实验")
    sys.exit(0 if failed == 0 else 1)
