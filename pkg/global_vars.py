"""
该模块声明了全局变量，用于在程序的不同部分之间共享状态和数据。具体包括：

- 控制线程结束的事件对象。
- 日志队列，用于存储各个模块和线程产生的日志信息。
- 运行日志文件的路径，由日志管理线程写入。
- 矩缓存目录，从环境变量 BHL_CACHE_DIR 读取。
"""

" 内置模块 "
import os
import threading

" 自定义模块 "
from logs import LogQueue

# 创建一个事件对象:当这个事件被触发，则会触发所有线程的结束
s_finished_event: threading.Event = threading.Event()

# 这个是日志队列，可以共享日志信息给日志管理线程，让日志管理线程将日志信息写入运行日志文件中。
lq: LogQueue = LogQueue()

# 运行日志文件路径，harness 会根据输出目录设置它
log_path: str | None = None

# 矩缓存目录，为 None 时不做持久化
cache_dir: str | None = os.environ.get('BHL_CACHE_DIR') or None
