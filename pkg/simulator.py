#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
QAOA态矢量模拟器
在对角代价谱上精确执行相位层和横场混合层，并读取能量期望与基态重叠度
"""

import logging
import struct
from pathlib import Path

import numpy as np

from errors import DimensionMismatchError, FileFormatError, InvalidInputError
from problems import DEFAULT_MAX_QUBITS

logger = logging.getLogger('simulator')


class StateVector:
    """2^N个复振幅，层操作后保持单位范数"""

    def __init__(self, amplitudes):
        amplitudes = np.asarray(amplitudes, dtype=np.complex128)
        size = amplitudes.shape[0]
        num_qubits = size.bit_length() - 1
        if amplitudes.ndim != 1 or size < 2 or (1 << num_qubits) != size:
            raise DimensionMismatchError(f"振幅个数{amplitudes.shape}不是2的正整数次幂")
        self.amplitudes = amplitudes
        self.num_qubits = num_qubits

    def copy(self):
        return StateVector(self.amplitudes.copy())

    def probabilities(self):
        return np.abs(self.amplitudes) ** 2

    def norm_squared(self):
        return float(np.sum(self.probabilities()))

    def __repr__(self):
        return f"StateVector(num_qubits={self.num_qubits})"


class Schedule:
    """一组QAOA角度(γ_1..γ_p, β_1..β_p)"""

    def __init__(self, gammas, betas):
        self.gammas = np.array(gammas, dtype=np.float64).reshape(-1)
        self.betas = np.array(betas, dtype=np.float64).reshape(-1)
        if self.gammas.shape != self.betas.shape:
            raise InvalidInputError(f"γ与β长度不一致: {self.gammas.shape[0]} vs {self.betas.shape[0]}")
        if self.gammas.shape[0] < 1:
            raise InvalidInputError("调度深度p至少为1")
        if not (np.all(np.isfinite(self.gammas)) and np.all(np.isfinite(self.betas))):
            raise InvalidInputError("调度角度必须全部为有限值")
        self.gammas.flags.writeable = False
        self.betas.flags.writeable = False

    @property
    def p(self):
        return self.gammas.shape[0]

    def __len__(self):
        return self.p

    def __eq__(self, other):
        if not isinstance(other, Schedule):
            return NotImplemented
        return np.array_equal(self.gammas, other.gammas) and np.array_equal(self.betas, other.betas)

    def __repr__(self):
        return f"Schedule(p={self.p})"


def _check_dimension(state, spectrum):
    if state.num_qubits != spectrum.num_qubits:
        raise DimensionMismatchError(
            f"态矢量量子比特数{state.num_qubits}与谱{spectrum.num_qubits}不一致")


def initial_plus_state(num_qubits, max_qubits=DEFAULT_MAX_QUBITS):
    """|+>^⊗N，每个振幅为2^{-N/2}"""
    if not 1 <= num_qubits <= max_qubits:
        raise InvalidInputError(f"量子比特数必须在1到{max_qubits}之间，当前为{num_qubits}")
    size = 1 << num_qubits
    return StateVector(np.full(size, 1.0 / np.sqrt(size), dtype=np.complex128))


def _phase_inplace(amplitudes, energies, gamma):
    amplitudes *= np.exp(-1j * gamma * energies)


def _mixer_inplace(amplitudes, num_qubits, beta):
    """逐个量子比特施加e^{-iβX}，每层代价N·2^N"""
    cos_b = np.cos(beta)
    sin_b = -1j * np.sin(beta)
    for qubit in range(num_qubits):
        # 第qubit位为0/1的两组振幅
        view = amplitudes.reshape(-1, 2, 1 << qubit)
        a0 = view[:, 0, :].copy()
        a1 = view[:, 1, :]
        view[:, 0, :] = cos_b * a0 + sin_b * a1
        view[:, 1, :] = sin_b * a0 + cos_b * a1


def apply_phase(state, spectrum, gamma):
    """振幅x乘以exp(-iγ·E_x)，返回新的态矢量"""
    _check_dimension(state, spectrum)
    result = state.copy()
    _phase_inplace(result.amplitudes, spectrum.energies, gamma)
    return result


def apply_mixer(state, beta):
    """施加⊗_i e^{-iβX_i}，返回新的态矢量"""
    result = state.copy()
    _mixer_inplace(result.amplitudes, result.num_qubits, beta)
    return result


def run_qaoa(spectrum, schedule):
    """从|+>^⊗N出发依次施加相位层γ_j与混合层β_j，j = 1..p"""
    state = initial_plus_state(spectrum.num_qubits, max_qubits=spectrum.num_qubits)
    amplitudes = state.amplitudes
    for gamma, beta in zip(schedule.gammas, schedule.betas):
        _phase_inplace(amplitudes, spectrum.energies, gamma)
        _mixer_inplace(amplitudes, spectrum.num_qubits, beta)
    return state


def expectation(state, spectrum):
    """<H_C> = Σ_x |a_x|²·E_x，np.sum按固定的成对求和顺序累加"""
    _check_dimension(state, spectrum)
    return float(np.sum(state.probabilities() * spectrum.energies))


def ground_overlap(state, spectrum):
    """所有简并基态上的概率之和"""
    _check_dimension(state, spectrum)
    probabilities = state.probabilities()
    return float(np.sum(probabilities[spectrum.ground_indices]))


def save_statevector(path, state):
    """调试用：写出N（u32）以及2^N个小端double复数对"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'wb') as f:
        f.write(struct.pack("<I", state.num_qubits))
        f.write(state.amplitudes.astype('<c16').tobytes())
    logger.debug(f"态矢量已保存: {path}")


def load_statevector(path):
    with open(path, 'rb') as f:
        data = f.read()
    if len(data) < 4:
        raise FileFormatError(f"态矢量文件过短: {path}")
    (num_qubits,) = struct.unpack_from("<I", data)
    payload = data[4:]
    if len(payload) != 16 * (1 << num_qubits):
        raise FileFormatError(f"态矢量文件数据长度与N={num_qubits}不一致")
    return StateVector(np.frombuffer(payload, dtype='<c16').astype(np.complex128))
