#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
QAOA迭代插值实验启动入口
此文件提供了一个独立的程序入口点，子命令与参数由cli模块解析
"""

import os
import sys


def main():
    """主入口函数"""
    try:
        # 确保当前工作目录包含项目模块
        current_dir = os.path.dirname(os.path.abspath(__file__))
        if current_dir not in sys.path:
            sys.path.append(current_dir)

        from cli import main as cli_main

        return cli_main(sys.argv[1:])

    except ImportError as e:
        print(f"错误: 无法导入必要的模块 - {str(e)}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
