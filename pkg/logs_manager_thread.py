"""
该模块定义了一个日志管理线程，用于批处理日志队列中的日志并写入运行日志文件。
"""

" 内置模块 "
import time

" 自定义模块 "
from logs import flush_logs
import global_vars


# 日志管理线程，批处理日志队列里面的日志到运行日志文件中的函数
def logs_manager_thread(log_path: str | None, fq: int = 100, interval: float = 1.0) -> None:
    """
    这是一个日志管理线程，它会批处理日志队列里面的日志到运行日志文件中
    :param log_path: 运行日志文件路径，为 None 时只转发给 logging
    :param fq: 一次批处理的日志记录数量
    :param interval: 两次批处理之间的间隔（秒）
    :return:
    """
    global_vars.lq.push(('日志管理线程-状态信息', 'Info', '日志管理线程启动'))
    while True:
        if global_vars.s_finished_event.is_set():  # 事件对象被设置，说明实验已经结束
            # 确保日志被完全写入
            while len(global_vars.lq) > 0:
                if flush_logs(global_vars.lq, log_path, fq) is False:
                    break
            break

        i = 0  # 重试计数器
        while flush_logs(global_vars.lq, log_path, fq) is False:  # 该函数一次可以批量处理fq条日志
            if i < 3:  # 最多重试3次
                i += 1
                time.sleep(interval)
            else:
                # 文件写不进去就只保留 logging 输出
                log_path = None

        global_vars.s_finished_event.wait(interval)
