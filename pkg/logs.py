"""
该模块定义了一个日志队列类和相关的日志处理函数。具体功能包括：

- 记录程序的状态和操作信息到日志队列中。
- 将日志队列中的日志记录转发给 logging，并追加写入运行日志文件。
"""

" 内置模块 "
import collections
import datetime
import logging
import threading

logger = logging.getLogger('bergman')

# 日志状态到 logging 级别的映射
_LEVELS = {
    'info': logging.INFO,
    'success': logging.INFO,
    'warning': logging.WARNING,
    'error': logging.ERROR,
}


# 定义一个用来记录日志的队列类
class LogQueue:
    """
    一个用来记录日志的队列，多个工作线程可以同时写入。
    """

    def __init__(self, maxlen: int = 100000):
        self.logs = collections.deque(maxlen=maxlen)
        self._lock = threading.Lock()

    def push(self, log: tuple) -> None:
        """
        将一条日志记录入队。
        :param log: 一个元组，代表一条日志记录，例如：('格点生成', 'Success', '生成 613 个格点')
        """
        stamped = (datetime.datetime.now().strftime('%Y-%m-%d %H:%M:%S'),) + tuple(log)
        with self._lock:
            self.logs.append(stamped)

    def pop(self) -> tuple:
        """
        弹出一条日志记录。
        :return: 元组形式的日志记录 (时间, 动作, 状态, 描述)
        """
        with self._lock:
            return self.logs.popleft()

    def __len__(self) -> int:
        with self._lock:
            return len(self.logs)


def log_action(log: tuple, log_file=None) -> None:
    """
    输出一条日志记录。
    :param log: (时间, 动作, 状态, 描述)
    :param log_file: 已打开的运行日志文件，为 None 时只转发给 logging
    """
    log_time, action, status, details = log
    logger.log(_LEVELS.get(str(status).lower(), logging.INFO), '%s - %s - %s', action, status, details)
    if log_file is not None:
        log_file.write(f"{log_time}\t{action}\t{status}\t{details}\n")


def flush_logs(log_queue: LogQueue, log_path: str | None, max_logs: int) -> bool:
    """
    从日志队列中取出最多 max_logs 条记录，转发给 logging 并追加到运行日志文件中。
    :param log_queue: 日志队列对象
    :param log_path: 运行日志文件路径，为 None 时不写文件
    :param max_logs: 最多取出多少条日志记录
    :return: True 表示完成该操作，False 表示失败
    """
    try:
        count = min(max_logs, len(log_queue))
        if log_path is None:
            for _ in range(count):
                log_action(log_queue.pop())
            return True
        with open(log_path, 'a', encoding='utf-8') as f:
            for _ in range(count):
                log_action(log_queue.pop(), f)
        return True
    except (OSError, IndexError) as e:
        logger.error(f"日志同步失败: {e}")
        return False
