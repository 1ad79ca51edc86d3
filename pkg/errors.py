"""
该模块定义了程序中使用的异常类型。所有数值模块抛出的异常都继承自 BergmanError，
命令行入口根据异常类型决定退出码：

- DomainError：输入超出允许的定义域（例如 r 不在 [0,1)、|z̄ζ| 过大、核级数在给定 η 下发散）。
- NumericalError：数值计算失败（被积函数出现非有限值、Gram 矩阵不是半正定、求积不收敛、特征值分解失败）。
- ConvergenceError：级数或截断基没有在上限内收敛。
- ConfigError：配置文件或命令行参数格式错误，携带出错字段的路径。
- ResourceError：超过配置的资源上限（格点数量、多项式次数、Gram 矩阵规模）。
"""


class BergmanError(Exception):
    """
    所有数值异常的基类。
    """


class DomainError(BergmanError, ValueError):
    """
    输入超出定义域。
    """


class NumericalError(BergmanError):
    """
    数值计算失败。
    """


class ConvergenceError(BergmanError):
    """
    级数或截断没有收敛。
    """


class ResourceError(BergmanError):
    """
    超过配置的资源上限。
    """


class ConfigError(BergmanError, ValueError):
    """
    配置错误，field 是出错字段的点分路径，例如 'lattice.R_max'。
    """

    def __init__(self, field: str, message: str):
        self.field = field
        self.message = message
        super().__init__(f"{field}: {message}" if field else message)
