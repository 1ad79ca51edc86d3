"""
测试共用的权函数和求积规则。
"""

" 内置模块 "
import os
import sys

" 第三方模块 "
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

" 自定义模块 "
from quadrature import make_rule
from weights import log_power, standard
import global_vars


@pytest.fixture(autouse=True)
def _no_moment_cache(monkeypatch):
    # 测试之间不共享磁盘上的矩缓存
    monkeypatch.setattr(global_vars, 'cache_dir', None)
    global_vars.s_finished_event.clear()


@pytest.fixture
def std0():
    return standard(0)


@pytest.fixture
def std1():
    return standard(1)


@pytest.fixture
def logpow():
    return log_power(-0.5, 0)


@pytest.fixture
def disc_rule():
    return make_rule(64, 128)


@pytest.fixture
def local_rule():
    return make_rule(24, 48)
