#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
基准问题构造模块
把LABS、SK自旋玻璃和投资组合优化三类问题编码为对角代价谱（2^N个能量值），
并提供可复现的随机实例生成、暴力枚举基准以及谱文件的导入导出

比特与自旋约定：比特0对应自旋+1，比特1对应自旋-1；量子比特i对应下标的第i位（小端）
"""

import logging
import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from errors import DimensionMismatchError, FileFormatError, InvalidInputError, ResourceLimitError

logger = logging.getLogger('problems')

# 谱与态矢量的内存上限
DEFAULT_MAX_QUBITS = 20

# 每个并行分块处理的下标数量
CHUNK_SIZE = 1 << 16

SPECTRUM_MAGIC = b"QSPC"
SPECTRUM_VERSION = 1
_SPECTRUM_HEADER = struct.Struct("<4sIIIq")


class ProblemKind(Enum):
    """问题类型，值与命令行参数--problem一致"""
    LABS = "labs"
    SK = "sk"
    PORTFOLIO = "po"

    @property
    def tag(self):
        """谱文件头中的类型编号"""
        return {ProblemKind.LABS: 0, ProblemKind.SK: 1, ProblemKind.PORTFOLIO: 2}[self]

    @classmethod
    def from_tag(cls, tag):
        for kind in cls:
            if kind.tag == tag:
                return kind
        raise FileFormatError(f"未知的问题类型编号: {tag}")


@dataclass(frozen=True, eq=False)
class CostSpectrum:
    """对角代价哈密顿量：下标x处为基态|x>的能量"""
    num_qubits: int
    energies: np.ndarray
    e_min: float
    e_max: float
    ground_set: frozenset
    kind: ProblemKind = None
    seed: int = 0

    def __post_init__(self):
        if self.energies.shape != (1 << self.num_qubits,):
            raise DimensionMismatchError(
                f"能量表长度{self.energies.shape}与2^{self.num_qubits}不一致")
        if not self.ground_set:
            raise InvalidInputError("基态集合不能为空")
        self.energies.flags.writeable = False

    @classmethod
    def from_energies(cls, energies, kind=None, seed=0):
        """由能量表构造谱，极值与基态集合通过暴力扫描得到"""
        energies = np.array(energies, dtype=np.float64)
        size = energies.shape[0]
        num_qubits = size.bit_length() - 1
        if size < 2 or (1 << num_qubits) != size:
            raise DimensionMismatchError(f"能量表长度{size}不是2的正整数次幂")
        e_min, e_max, ground_set = brute_force_extremes(energies)
        return cls(num_qubits, energies, e_min, e_max, ground_set, kind, seed)

    @property
    def ground_indices(self):
        """基态下标的有序数组，供模拟器读取重叠度"""
        return np.fromiter(sorted(self.ground_set), dtype=np.int64, count=len(self.ground_set))

    def scaled(self, factor):
        """所有能量乘以factor后的新谱（用于检验AR的尺度不变性）"""
        return CostSpectrum.from_energies(self.energies * factor, self.kind, self.seed)


@dataclass(frozen=True, eq=False)
class SKInstance:
    """SK模型实例，couplings按i<j行优先顺序存储J_ij"""
    n: int
    couplings: np.ndarray
    seed: int = 0

    def __post_init__(self):
        expected = self.n * (self.n - 1) // 2
        if self.couplings.shape != (expected,):
            raise DimensionMismatchError(f"耦合数{self.couplings.shape}应为{expected}")

    def pairs(self):
        """按存储顺序返回(i, j)对"""
        rows, cols = np.triu_indices(self.n, 1)
        return list(zip(rows.tolist(), cols.tolist()))


@dataclass(frozen=True, eq=False)
class PortfolioInstance:
    """投资组合实例：min q·xᵀΣx − μᵀx，约束Σx_i = K以二次罚项λ(Σx_i − K)²编码"""
    n: int
    covariance: np.ndarray
    expected_returns: np.ndarray
    risk_tradeoff: float
    cardinality: int
    penalty_weight: float
    seed: int = 0

    def __post_init__(self):
        if self.covariance.shape != (self.n, self.n) or self.expected_returns.shape != (self.n,):
            raise DimensionMismatchError("协方差矩阵或期望收益向量维度与n不一致")
        if not 1 <= self.cardinality <= self.n:
            raise InvalidInputError(f"K必须满足1 ≤ K ≤ n，当前K={self.cardinality}, n={self.n}")
        if not self.penalty_weight > 0:
            raise InvalidInputError(f"罚项系数必须为正，当前λ={self.penalty_weight}")
        if np.max(np.abs(self.covariance - self.covariance.T)) > 1e-12:
            raise InvalidInputError("协方差矩阵不对称")
        if np.linalg.eigvalsh(self.covariance)[0] < -1e-9:
            raise InvalidInputError("协方差矩阵不是半正定的")


def _check_size(n, max_qubits, minimum):
    if n < minimum:
        raise InvalidInputError(f"问题规模必须至少为{minimum}，当前为{n}")
    if n > max_qubits:
        raise ResourceLimitError(f"问题规模{n}超过上限{max_qubits}（可通过--max-qubits调整）")


def spin_table(num_qubits, start=0, stop=None):
    """下标区间[start, stop)对应的自旋表，形状(stop-start, N)，取值±1"""
    if stop is None:
        stop = 1 << num_qubits
    indices = np.arange(start, stop, dtype=np.int64)
    bits = (indices[:, None] >> np.arange(num_qubits, dtype=np.int64)) & 1
    return (1 - 2 * bits).astype(np.int64)


def spins_from_index(index, num_qubits):
    """单个基态下标对应的自旋序列"""
    return spin_table(num_qubits, index, index + 1)[0]


def _build_energies(num_qubits, chunk_energies, workers=1):
    """按下标分块计算能量表，分块只影响调度，逐下标计算保证结果与顺序计算逐位一致"""
    size = 1 << num_qubits
    bounds = [(start, min(start + CHUNK_SIZE, size)) for start in range(0, size, CHUNK_SIZE)]
    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            parts = list(executor.map(lambda b: chunk_energies(*b), bounds))
    else:
        parts = [chunk_energies(start, stop) for start, stop in bounds]
    return np.concatenate(parts).astype(np.float64)


def brute_force_extremes(spectrum):
    """精确扫描能量表，返回(e_min, e_max, 基态下标集合)"""
    energies = spectrum.energies if isinstance(spectrum, CostSpectrum) else np.asarray(spectrum)
    e_min = float(energies.min())
    e_max = float(energies.max())
    ground_set = frozenset(np.flatnonzero(energies == e_min).tolist())
    return e_min, e_max, ground_set


# ---------------------------------------------------------------- LABS

def _validate_spins(s, minimum=1):
    spins = np.asarray(s)
    if spins.ndim != 1 or spins.shape[0] < minimum:
        raise InvalidInputError(f"自旋序列长度至少为{minimum}")
    if not np.all((spins == 1) | (spins == -1)):
        raise InvalidInputError("自旋取值必须为+1或-1")
    return spins.astype(np.int64)


def labs_energy(s):
    """LABS能量 E = Σ_k C_k²，C_k = Σ_i s_i·s_{i+k}，返回整数"""
    spins = _validate_spins(s, minimum=2)
    n = spins.shape[0]
    return sum(int(np.dot(spins[:-k], spins[k:])) ** 2 for k in range(1, n))


def merit_factor_from_energy(n, energy):
    """MF = N²/(2E)，energy可以是期望能量"""
    if energy == 0:
        raise ZeroDivisionError("LABS能量为0，无法计算品质因子")
    return n * n / (2.0 * energy)


def labs_merit_factor(s):
    """序列的品质因子 MF(s) = N²/(2·E_LABS(s))"""
    spins = _validate_spins(s, minimum=2)
    return merit_factor_from_energy(spins.shape[0], labs_energy(spins))


def _labs_chunk(num_qubits):
    def chunk_energies(start, stop):
        spins = spin_table(num_qubits, start, stop)
        energy = np.zeros(stop - start, dtype=np.int64)
        for k in range(1, num_qubits):
            correlation = np.sum(spins[:, :-k] * spins[:, k:], axis=1)
            energy += correlation * correlation
        return energy
    return chunk_energies


def build_labs_spectrum(n, max_qubits=DEFAULT_MAX_QUBITS, workers=1):
    """LABS的代价谱，每个N只有一个实例，没有随机种子"""
    _check_size(n, max_qubits, minimum=2)
    energies = _build_energies(n, _labs_chunk(n), workers)
    logger.debug(f"LABS谱构造完成: N={n}")
    return CostSpectrum.from_energies(energies, ProblemKind.LABS, 0)


# ---------------------------------------------------------------- SK

def generate_sk_instance(n, seed):
    """从(n, seed)生成SK实例，J_ij服从标准正态分布"""
    if n < 2:
        raise InvalidInputError(f"SK模型至少需要2个自旋，当前n={n}")
    rng = np.random.default_rng(seed)
    return SKInstance(n, rng.standard_normal(n * (n - 1) // 2), seed)


def _sk_energies(instance, spins):
    spins = np.asarray(spins, dtype=np.float64)
    energy = np.zeros(spins.shape[0], dtype=np.float64)
    for coupling, (i, j) in zip(instance.couplings, instance.pairs()):
        energy += coupling * (spins[:, i] * spins[:, j])
    return energy / math.sqrt(instance.n)


def sk_energy(instance, s):
    """SK能量 N^{-1/2} Σ_{i<j} J_ij s_i s_j，与谱构造走同一计算路径"""
    spins = _validate_spins(s)
    if spins.shape[0] != instance.n:
        raise DimensionMismatchError(f"自旋序列长度{spins.shape[0]}与实例规模{instance.n}不一致")
    return float(_sk_energies(instance, spins[None, :])[0])


def spectrum_from_sk_instance(instance, max_qubits=DEFAULT_MAX_QUBITS, workers=1):
    _check_size(instance.n, max_qubits, minimum=2)
    energies = _build_energies(
        instance.n, lambda start, stop: _sk_energies(instance, spin_table(instance.n, start, stop)), workers)
    return CostSpectrum.from_energies(energies, ProblemKind.SK, instance.seed)


def build_sk_spectrum(n, seed, max_qubits=DEFAULT_MAX_QUBITS, workers=1):
    """SK代价谱，由(n, seed)完全确定"""
    _check_size(n, max_qubits, minimum=2)
    spectrum = spectrum_from_sk_instance(generate_sk_instance(n, seed), max_qubits, workers)
    logger.debug(f"SK谱构造完成: n={n}, seed={seed}, e_min={spectrum.e_min:.6f}")
    return spectrum


# ---------------------------------------------------------------- 投资组合

def default_penalty_weight(expected_returns, covariance, risk_tradeoff):
    """λ = 2·(max|μ_i| + q·max_i Σ_ii·n)"""
    n = expected_returns.shape[0]
    return 2.0 * (float(np.max(np.abs(expected_returns)))
                  + risk_tradeoff * float(np.max(np.diag(covariance))) * n)


def generate_portfolio_instance(n, seed, risk_tradeoff=0.5, cardinality=None, penalty_weight=None):
    """
    合成投资组合实例：μ_i ~ U[0, 0.1]；Σ = B·Bᵀ/f 并缩放到对角线均值为1，
    B为n×f标准正态矩阵，f = ⌈n/2⌉
    """
    if n < 1:
        raise InvalidInputError(f"资产数量必须为正，当前n={n}")
    if cardinality is None:
        cardinality = max(1, n // 2)
    rng = np.random.default_rng(seed)
    expected_returns = rng.uniform(0.0, 0.1, size=n)
    factors = math.ceil(n / 2)
    loadings = rng.standard_normal((n, factors))
    covariance = loadings @ loadings.T / factors
    covariance = covariance / np.mean(np.diag(covariance))
    covariance = 0.5 * (covariance + covariance.T)
    if penalty_weight is None:
        penalty_weight = default_penalty_weight(expected_returns, covariance, risk_tradeoff)
    return PortfolioInstance(n, covariance, expected_returns, float(risk_tradeoff),
                             int(cardinality), float(penalty_weight), seed)


def _portfolio_terms(instance, selections):
    """返回(原始目标值, 约束违背量Σx_i − K)，按固定顺序逐项累加"""
    x = np.asarray(selections, dtype=np.float64)
    cov = instance.covariance
    risk = np.zeros(x.shape[0], dtype=np.float64)
    for i in range(instance.n):
        risk += cov[i, i] * x[:, i]
        for j in range(i + 1, instance.n):
            risk += 2.0 * cov[i, j] * (x[:, i] * x[:, j])
    returns = np.zeros(x.shape[0], dtype=np.float64)
    for i in range(instance.n):
        returns += instance.expected_returns[i] * x[:, i]
    objective = instance.risk_tradeoff * risk - returns
    violation = np.sum(x, axis=1) - instance.cardinality
    return objective, violation


def _portfolio_energies(instance, selections):
    objective, violation = _portfolio_terms(instance, selections)
    return objective + instance.penalty_weight * (violation * violation)


def portfolio_objective(instance, x):
    """单个选择向量x ∈ {0,1}^n的原始目标值（不含罚项）"""
    selection = np.asarray(x)
    if selection.shape != (instance.n,) or not np.all((selection == 0) | (selection == 1)):
        raise InvalidInputError("选择向量必须是长度为n的0/1序列")
    return float(_portfolio_terms(instance, selection[None, :])[0][0])


def build_portfolio_spectrum(instance, max_qubits=DEFAULT_MAX_QUBITS, workers=1):
    """投资组合代价谱，可行态（Σx_i = K）的罚项恰好为0"""
    _check_size(instance.n, max_qubits, minimum=1)

    def chunk_energies(start, stop):
        # 资产选择x_i即下标的第i位
        selections = (1 - spin_table(instance.n, start, stop)) // 2
        return _portfolio_energies(instance, selections)

    energies = _build_energies(instance.n, chunk_energies, workers)
    logger.debug(f"投资组合谱构造完成: n={instance.n}, K={instance.cardinality}, λ={instance.penalty_weight:.4f}")
    return CostSpectrum.from_energies(energies, ProblemKind.PORTFOLIO, instance.seed)


def build_spectrum(kind, n, seed=0, cardinality=None, risk_tradeoff=0.5, penalty_weight=None,
                   max_qubits=DEFAULT_MAX_QUBITS, workers=1):
    """按问题类型分派的统一构造入口，(kind, n, seed)完全决定结果"""
    kind = ProblemKind(kind)
    if kind is ProblemKind.LABS:
        return build_labs_spectrum(n, max_qubits, workers)
    if kind is ProblemKind.SK:
        return build_sk_spectrum(n, seed, max_qubits, workers)
    _check_size(n, max_qubits, minimum=1)
    instance = generate_portfolio_instance(n, seed, risk_tradeoff, cardinality, penalty_weight)
    return build_portfolio_spectrum(instance, max_qubits, workers)


# ---------------------------------------------------------------- 谱文件

def save_spectrum(path, spectrum):
    """写入二进制谱文件：文件头(QSPC, 版本, N, 类型, 种子) + 2^N个小端double"""
    kind_tag = spectrum.kind.tag if spectrum.kind is not None else 0xFFFFFFFF
    header = _SPECTRUM_HEADER.pack(SPECTRUM_MAGIC, SPECTRUM_VERSION, spectrum.num_qubits,
                                   kind_tag, int(spectrum.seed))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'wb') as f:
        f.write(header)
        f.write(spectrum.energies.astype('<f8').tobytes())
    logger.debug(f"谱文件已保存: {path}")


def load_spectrum(path):
    """读取save_spectrum写出的谱文件"""
    with open(path, 'rb') as f:
        data = f.read()
    if len(data) < _SPECTRUM_HEADER.size:
        raise FileFormatError(f"谱文件过短: {path}")
    magic, version, num_qubits, kind_tag, seed = _SPECTRUM_HEADER.unpack_from(data)
    if magic != SPECTRUM_MAGIC:
        raise FileFormatError(f"谱文件标识错误: {magic!r}")
    if version != SPECTRUM_VERSION:
        raise FileFormatError(f"不支持的谱文件版本: {version}")
    payload = data[_SPECTRUM_HEADER.size:]
    if len(payload) != 8 * (1 << num_qubits):
        raise FileFormatError(f"谱文件数据长度与N={num_qubits}不一致")
    energies = np.frombuffer(payload, dtype='<f8').astype(np.float64)
    kind = None if kind_tag == 0xFFFFFFFF else ProblemKind.from_tag(kind_tag)
    return CostSpectrum.from_energies(energies, kind, seed)
