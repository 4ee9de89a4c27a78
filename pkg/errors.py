#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
错误类型定义
所有模块共用的异常类，统一从QAOAIIError派生
"""


class QAOAIIError(Exception):
    """项目内所有异常的基类"""


class InvalidInputError(QAOAIIError, ValueError):
    """输入数据不合法（自旋取值、角度、阈值等）"""


class DimensionMismatchError(InvalidInputError):
    """态矢量、谱、自旋序列之间的维度不一致"""


class ResourceLimitError(QAOAIIError, ValueError):
    """问题规模超过内存上限（默认N≤20）"""


class NumericalFailureError(QAOAIIError, ArithmeticError):
    """最小二乘拟合矩阵秩亏，附带诊断信息"""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})

    def __str__(self):
        base = super().__str__()
        if not self.diagnostics:
            return base
        details = ", ".join(f"{key}={value}" for key, value in self.diagnostics.items())
        return f"{base} ({details})"


class ConfigError(InvalidInputError):
    """配置校验失败，problems中列出全部问题"""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("配置校验失败: " + "; ".join(self.problems))


class EmptySummaryError(QAOAIIError):
    """所有运行都未达到目标，无法汇总"""


class FileFormatError(InvalidInputError):
    """谱文件或调度文件格式错误"""
