#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
调度参数化模块
把QAOA调度看作[0,1]上的函数，用正交函数族的系数表示；
提供角度与系数之间的互相转换、向新深度插值，以及线性斜坡和Fourier参数化
"""

import logging
from enum import Enum
from pathlib import Path

import numpy as np
from numpy.polynomial import chebyshev, legendre
from scipy import linalg

from errors import FileFormatError, InvalidInputError, NumericalFailureError
from simulator import Schedule

logger = logging.getLogger('schedule')

GAMMA = "gamma"
BETA = "beta"

SCHEDULE_FORMAT_VERSION = 1
RAW_KIND = "raw"


class BasisKind(Enum):
    """调度函数族，值与命令行参数--basis一致"""
    CHEBYSHEV = "chebyshev"
    LEGENDRE = "legendre"
    FOURIER = "fourier"
    LINEAR = "linear"

    @property
    def is_polynomial(self):
        return self in (BasisKind.CHEBYSHEV, BasisKind.LEGENDRE)

    @property
    def max_coefficients(self):
        # 线性斜坡只有常数项和斜率项
        return 2 if self is BasisKind.LINEAR else None


class CoefficientSchedule:
    """基函数类型 + γ系数u与β系数v；系数与深度无关，只在求值时绑定p"""

    def __init__(self, kind, u, v):
        self.kind = BasisKind(kind)
        self.u = np.array(u, dtype=np.float64).reshape(-1)
        self.v = np.array(v, dtype=np.float64).reshape(-1)
        if self.u.shape != self.v.shape:
            raise InvalidInputError(f"u与v长度不一致: {self.u.shape[0]} vs {self.v.shape[0]}")
        if self.u.shape[0] < 1:
            raise InvalidInputError("系数个数C至少为1")
        limit = self.kind.max_coefficients
        if limit is not None and self.u.shape[0] > limit:
            raise InvalidInputError(f"{self.kind.value}基最多{limit}个系数")
        if not (np.all(np.isfinite(self.u)) and np.all(np.isfinite(self.v))):
            raise InvalidInputError("系数必须全部为有限值")
        self.u.flags.writeable = False
        self.v.flags.writeable = False

    @property
    def C(self):
        return self.u.shape[0]

    def active_vector(self, active):
        """前active个系数拼成优化变量 (u_1..u_C, v_1..v_C)"""
        return np.concatenate([self.u[:active], self.v[:active]])

    def with_active(self, vector, active):
        """用优化变量替换前active个系数，其余系数保持不变"""
        vector = np.asarray(vector, dtype=np.float64)
        u = self.u.copy()
        v = self.v.copy()
        u[:active] = vector[:active]
        v[:active] = vector[active:2 * active]
        return CoefficientSchedule(self.kind, u, v)

    def padded(self, count):
        """补零到count个系数；新增模式的初值为0"""
        if count <= self.C:
            return self
        extra = np.zeros(count - self.C)
        return CoefficientSchedule(self.kind, np.concatenate([self.u, extra]),
                                   np.concatenate([self.v, extra]))

    def scaled(self, factor):
        """全部系数乘以factor，即γ(t)与β(t)整体缩放"""
        return CoefficientSchedule(self.kind, self.u * factor, self.v * factor)

    def __eq__(self, other):
        if not isinstance(other, CoefficientSchedule):
            return NotImplemented
        return (self.kind is other.kind and np.array_equal(self.u, other.u)
                and np.array_equal(self.v, other.v))

    def __repr__(self):
        return f"CoefficientSchedule(kind={self.kind.value}, C={self.C})"


def _polynomial_columns(kind, t, count):
    x = 2.0 * np.asarray(t, dtype=np.float64) - 1.0
    degrees = np.arange(count)
    if kind is BasisKind.LEGENDRE:
        return legendre.legvander(x, count - 1) * np.sqrt(2.0 * degrees + 1.0)
    # 带权(1-x²)^{-1/2}的正交归一化
    scale = np.where(degrees == 0, np.sqrt(1.0 / np.pi), np.sqrt(2.0 / np.pi))
    return chebyshev.chebvander(x, count - 1) * scale


def _fourier_columns(layer, count, p, branch):
    """layer为层序号i（可以是非整数），sin/cos[(j-½)(i-½)π/p]"""
    phases = np.outer(np.asarray(layer, dtype=np.float64) - 0.5, np.arange(count) + 0.5) * (np.pi / p)
    return np.sin(phases) if branch == GAMMA else np.cos(phases)


def _linear_columns(t, count, branch):
    t = np.asarray(t, dtype=np.float64)
    ramp = t if branch == GAMMA else 1.0 - t
    return np.stack([np.ones_like(t), ramp], axis=1)[:, :count]


def basis_matrix(kind, p, count, branch=GAMMA):
    """A_ij = f_j(i/p)，i = 1..p，j = 1..count"""
    kind = BasisKind(kind)
    if p < 1 or count < 1:
        raise InvalidInputError(f"p与C必须为正整数，当前p={p}, C={count}")
    layers = np.arange(1, p + 1, dtype=np.float64)
    if kind is BasisKind.FOURIER:
        return _fourier_columns(layers, count, p, branch)
    if kind is BasisKind.LINEAR:
        return _linear_columns(layers / p, count, branch)
    return _polynomial_columns(kind, layers / p, count)


def eval_basis(kind, j, t, p=None, branch=GAMMA):
    """第j个基函数在t处的值；多项式基忽略p，Fourier基按t = i/p换算层序号"""
    kind = BasisKind(kind)
    if j < 1:
        raise InvalidInputError(f"基函数序号j从1开始，当前j={j}")
    if not 0.0 <= t <= 1.0:
        raise InvalidInputError(f"t必须在[0,1]内，当前t={t}")
    if kind is BasisKind.FOURIER:
        if p is None or p < 1:
            raise InvalidInputError("Fourier基求值需要当前深度p")
        return float(_fourier_columns([t * p], j, p, branch)[0, j - 1])
    if kind is BasisKind.LINEAR:
        if j > 2:
            raise InvalidInputError("线性斜坡只有两个基函数")
        return float(_linear_columns([t], j, branch)[0, j - 1])
    return float(_polynomial_columns(kind, [t], j)[0, j - 1])


def linear_schedule(a_beta, b_beta, a_gamma, b_gamma, p):
    """β_i = a_β + b_β(1 − i/p)，γ_i = a_γ + b_γ·i/p"""
    if p < 1:
        raise InvalidInputError(f"p至少为1，当前p={p}")
    t = np.arange(1, p + 1, dtype=np.float64) / p
    return Schedule(a_gamma + b_gamma * t, a_beta + b_beta * (1.0 - t))


def coeffs_to_angles(cs, p):
    """γ_i = Σ_j u_j f_j(i/p)，β_i = Σ_j v_j f_j(i/p)"""
    if p < 1:
        raise InvalidInputError(f"p至少为1，当前p={p}")
    if cs.kind is BasisKind.LINEAR:
        slope_u = cs.u[1] if cs.C > 1 else 0.0
        slope_v = cs.v[1] if cs.C > 1 else 0.0
        return linear_schedule(cs.v[0], slope_v, cs.u[0], slope_u, p)
    gammas = basis_matrix(cs.kind, p, cs.C, GAMMA) @ cs.u
    betas = basis_matrix(cs.kind, p, cs.C, BETA) @ cs.v
    return Schedule(gammas, betas)


def interpolate(cs, p_new):
    """在新网格t_i = i/p_new上求值；Fourier基的频率随新的p缩放"""
    return coeffs_to_angles(cs, p_new)


def _least_squares(matrix, target, kind, branch):
    solution, _, rank, singular_values = linalg.lstsq(matrix, target, lapack_driver='gelsd')
    count = matrix.shape[1]
    if rank < count:
        raise NumericalFailureError(
            f"{kind.value}基的{branch}拟合矩阵秩亏",
            {"rank": int(rank), "C": count, "p": matrix.shape[0],
             "sigma_max": float(singular_values[0]), "sigma_min": float(singular_values[-1])})
    return solution


def angles_to_coeffs(schedule, kind, count):
    """
    最小二乘求解A·u ≈ γ与A·v ≈ β（秩揭示的SVD分解，不使用正规方程）
    返回(系数调度, 残差范数)，残差为γ与β两部分的合并二范数
    """
    kind = BasisKind(kind)
    p = schedule.p
    if not 1 <= count <= p:
        raise InvalidInputError(f"系数个数C必须满足1 ≤ C ≤ p，当前C={count}, p={p}")
    limit = kind.max_coefficients
    if limit is not None and count > limit:
        raise InvalidInputError(f"{kind.value}基最多{limit}个系数")
    gamma_matrix = basis_matrix(kind, p, count, GAMMA)
    beta_matrix = basis_matrix(kind, p, count, BETA)
    u = _least_squares(gamma_matrix, schedule.gammas, kind, GAMMA)
    v = _least_squares(beta_matrix, schedule.betas, kind, BETA)
    residual = float(np.hypot(np.linalg.norm(gamma_matrix @ u - schedule.gammas),
                              np.linalg.norm(beta_matrix @ v - schedule.betas)))
    logger.debug(f"系数拟合: basis={kind.value}, C={count}, p={p}, residual={residual:.3e}")
    return CoefficientSchedule(kind, u, v), residual


def truncate(cs, count):
    """只保留前count个系数（主导模式重建）"""
    if not 1 <= count <= cs.C:
        raise InvalidInputError(f"截断个数必须在1到{cs.C}之间，当前为{count}")
    return CoefficientSchedule(cs.kind, cs.u[:count], cs.v[:count])


def zhou_fourier_angles(u, v, p):
    """γ_i = Σ_{j=1}^{p} u_j sin[(j-½)(i-½)π/p]，β_i = Σ v_j cos[...]"""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != (p,) or v.shape != (p,):
        raise InvalidInputError(f"Fourier参数化要求|u| = |v| = p = {p}")
    return coeffs_to_angles(CoefficientSchedule(BasisKind.FOURIER, u, v), p)


# ---------------------------------------------------------------- 文本文件

def _write_table(path, header, first, second):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        f.write(f"# qaoa-ii schedule format {SCHEDULE_FORMAT_VERSION}\n")
        f.write(header + "\n")
        for a, b in zip(first, second):
            f.write(f"{a:.17g} {b:.17g}\n")


def _read_table(path):
    with open(path, 'r', encoding='utf-8') as f:
        lines = [line.strip() for line in f if line.strip() and not line.startswith('#')]
    if not lines:
        raise FileFormatError(f"调度文件为空: {path}")
    header = lines[0].split()
    if len(header) != 3:
        raise FileFormatError(f"调度文件头应为'kind C p': {lines[0]}")
    try:
        count, p = int(header[1]), int(header[2])
        rows = np.array([[float(x) for x in line.split()] for line in lines[1:]], dtype=np.float64)
    except ValueError as e:
        raise FileFormatError(f"调度文件数值解析失败: {e}") from e
    if rows.shape != (count, 2):
        raise FileFormatError(f"调度文件应有{count}行两列数据，实际为{rows.shape}")
    return header[0], count, p, rows


def write_schedule(path, schedule):
    """原始角度文件：头'raw p p'，每行'gamma beta'"""
    _write_table(path, f"{RAW_KIND} {schedule.p} {schedule.p}", schedule.gammas, schedule.betas)


def read_schedule(path):
    kind, _, _, rows = _read_table(path)
    if kind != RAW_KIND:
        raise FileFormatError(f"{path}是系数文件而不是原始调度文件")
    return Schedule(rows[:, 0], rows[:, 1])


def write_coefficients(path, cs, p):
    """系数文件：头'kind C p'，每行'u v'"""
    _write_table(path, f"{cs.kind.value} {cs.C} {p}", cs.u, cs.v)


def read_coefficients(path):
    """返回(系数调度, 写出时的深度p)"""
    kind, _, p, rows = _read_table(path)
    try:
        basis = BasisKind(kind)
    except ValueError as e:
        raise FileFormatError(f"未知的基函数类型: {kind}") from e
    return CoefficientSchedule(basis, rows[:, 0], rows[:, 1]), p
