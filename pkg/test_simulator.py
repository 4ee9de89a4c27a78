#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
态矢量模拟器测试
与稠密酉矩阵（scipy.linalg.expm + Kronecker积）逐振幅对照
"""

import os
import sys
import tempfile

import numpy as np
from scipy import linalg

from errors import DimensionMismatchError, InvalidInputError
from problems import CostSpectrum, build_labs_spectrum, build_sk_spectrum, generate_sk_instance
from simulator import (Schedule, apply_mixer, apply_phase, expectation, ground_overlap,
                       initial_plus_state, load_statevector, run_qaoa, save_statevector)

PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]])


def _mixer_hamiltonian(n):
    """Σ_i X_i；量子比特i是下标的第i位，对应Kronecker积中从右数第i个因子"""
    total = np.zeros((1 << n, 1 << n))
    for qubit in range(n):
        term = np.array([[1.0]])
        for position in reversed(range(n)):
            term = np.kron(term, PAULI_X if position == qubit else np.eye(2))
        total += term
    return total


def _dense_qaoa(spectrum, schedule):
    n = spectrum.num_qubits
    mixer = _mixer_hamiltonian(n)
    state = np.full(1 << n, 1.0 / np.sqrt(1 << n), dtype=np.complex128)
    for gamma, beta in zip(schedule.gammas, schedule.betas):
        state = np.exp(-1j * gamma * spectrum.energies) * state
        state = linalg.expm(-1j * beta * mixer) @ state
    return state


def test_matches_dense_oracle():
    rng = np.random.default_rng(2024)
    for n in range(2, 6):
        spectrum = build_sk_spectrum(n, n)
        for p in (1, 2, 3):
            for _ in range(8):
                schedule = Schedule(rng.uniform(-np.pi, np.pi, p), rng.uniform(-np.pi, np.pi, p))
                fast = run_qaoa(spectrum, schedule).amplitudes
                dense = _dense_qaoa(spectrum, schedule)
                assert np.max(np.abs(fast - dense)) < 1e-9


def test_single_layer_helpers_match_run():
    spectrum = build_labs_spectrum(5)
    schedule = Schedule([0.31], [0.77])
    state = apply_mixer(apply_phase(initial_plus_state(5), spectrum, 0.31), 0.77)
    assert np.allclose(state.amplitudes, run_qaoa(spectrum, schedule).amplitudes, atol=1e-12)


def test_phase_layers_compose_additively():
    spectrum = build_sk_spectrum(6, 3)
    state = apply_mixer(apply_phase(initial_plus_state(6), spectrum, 0.4), 0.9)
    rng = np.random.default_rng(17)
    for gamma_1, gamma_2 in rng.uniform(-np.pi, np.pi, size=(5, 2)):
        split = apply_phase(apply_phase(state, spectrum, gamma_1), spectrum, gamma_2)
        swapped = apply_phase(apply_phase(state, spectrum, gamma_2), spectrum, gamma_1)
        joined = apply_phase(state, spectrum, gamma_1 + gamma_2)
        assert np.allclose(split.amplitudes, joined.amplitudes, atol=1e-12)
        assert np.allclose(split.amplitudes, swapped.amplitudes, atol=1e-12)


def test_norm_is_preserved():
    spectrum = build_sk_spectrum(8, 1)
    rng = np.random.default_rng(5)
    schedule = Schedule(rng.normal(size=6), rng.normal(size=6))
    assert abs(run_qaoa(spectrum, schedule).norm_squared() - 1.0) < 1e-12


def test_zero_schedule_gives_uniform_averages():
    zero = Schedule([0.0, 0.0], [0.0, 0.0])
    for seed in range(5):
        n = 6 + seed
        spectrum = build_sk_spectrum(n, seed)
        assert abs(expectation(run_qaoa(spectrum, zero), spectrum)) < 1e-9
    for n in range(2, 12):
        spectrum = build_labs_spectrum(n)
        assert abs(expectation(run_qaoa(spectrum, zero), spectrum) - n * (n - 1) / 2) < 1e-9
        expected_overlap = len(spectrum.ground_set) / (1 << n)
        assert abs(ground_overlap(run_qaoa(spectrum, zero), spectrum) - expected_overlap) < 1e-12


def test_two_spin_sk_reaches_ground_state_at_depth_one():
    instance = generate_sk_instance(2, 0)
    spectrum = build_sk_spectrum(2, 0)
    coupling = abs(instance.couplings[0]) / np.sqrt(2)
    best = 0.0
    for theta in np.linspace(-np.pi, np.pi, 81):
        for beta in np.linspace(-np.pi / 2, np.pi / 2, 81):
            state = run_qaoa(spectrum, Schedule([theta / coupling], [beta]))
            best = max(best, ground_overlap(state, spectrum))
    assert best >= 0.99


def test_dimension_mismatch_is_rejected():
    spectrum = build_labs_spectrum(4)
    try:
        apply_phase(initial_plus_state(3), spectrum, 0.1)
    except DimensionMismatchError:
        return
    raise AssertionError("维度不一致应被拒绝")


def test_schedule_validation():
    for gammas, betas in (([0.1, 0.2], [0.1]), ([], []), ([np.nan], [0.1]), ([0.1], [np.inf])):
        try:
            Schedule(gammas, betas)
        except InvalidInputError:
            continue
        raise AssertionError(f"调度({gammas}, {betas})应被拒绝")
    assert len(Schedule([0.1, 0.2], [0.3, 0.4])) == 2


def test_initial_state_bounds():
    assert np.allclose(initial_plus_state(3).amplitudes, 1 / np.sqrt(8))
    for n in (0, 21):
        try:
            initial_plus_state(n)
        except InvalidInputError:
            continue
        raise AssertionError(f"N={n}应被拒绝")


def test_constant_spectrum_phase_is_global():
    spectrum = CostSpectrum.from_energies(np.full(8, 2.5))
    state = run_qaoa(spectrum, Schedule([0.7, 1.3], [0.2, 0.9]))
    # 常数谱只贡献全局相位，混合层作用在|+>上也只产生相位
    assert np.allclose(state.probabilities(), 1 / 8, atol=1e-12)
    assert abs(ground_overlap(state, spectrum) - 1.0) < 1e-12


def test_statevector_file_round_trip():
    spectrum = build_sk_spectrum(4, 2)
    state = run_qaoa(spectrum, Schedule([0.4], [0.6]))
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "state.bin")
        save_statevector(path, state)
        loaded = load_statevector(path)
    assert loaded.num_qubits == 4
    assert np.array_equal(loaded.amplitudes, state.amplitudes)


if __name__ == "__main__":
    print("开始运行模拟器测试...")
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
