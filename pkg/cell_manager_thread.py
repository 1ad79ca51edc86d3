"""
该模块定义了实验单元的工作线程：从共享队列中取出 (权函数, 符号, η, r) 单元，计算后把结果写回结果字典。
"""

" 内置模块 "
import queue
import threading
import time
import traceback

" 自定义模块 "
from errors import BergmanError
import global_vars


def cell_manager_thread(task_queue: queue.Queue, results: dict, results_lock: threading.Lock, compute,
                        name: str = '单元线程') -> None:
    """
    这是一个实验单元线程，它会不断从任务队列中取出单元并计算，直到队列为空或者收到结束事件。
    :param task_queue: 任务队列，元素为 (序号, 单元)
    :param results: 结果字典，键为单元序号
    :param results_lock: 写结果字典时使用的锁
    :param compute: 计算一个单元的函数，返回该单元的结果字典
    :param name: 线程名称，用于日志
    :return:
    """
    global_vars.lq.push((f'{name}-状态信息', 'Info', f'{name}启动'))
    while not global_vars.s_finished_event.is_set():
        try:
            index, cell = task_queue.get_nowait()
        except queue.Empty:
            break

        start = time.perf_counter()
        try:
            result = compute(cell)
        except BergmanError as e:
            # 共享数据出错时整个单元失败，其它单元继续
            result = {'error': {'kind': type(e).__name__, 'message': str(e)}}
            global_vars.lq.push((f'{name}-计算单元', 'Error', f'{cell}: {type(e).__name__}: {e}'))
        except Exception as e:
            result = {'error': {'kind': type(e).__name__, 'message': str(e)}}
            global_vars.lq.push((f'{name}-计算单元', 'Error', f'{cell}: {traceback.format_exc()}'))
        result['runtime'] = time.perf_counter() - start

        with results_lock:
            results[index] = result
        global_vars.lq.push((f'{name}-计算单元', 'Success' if 'error' not in result else 'Warning',
                             f"{cell} 完成，用时 {result['runtime']:.2f} 秒"))
        task_queue.task_done()

    global_vars.lq.push((f'{name}-状态信息', 'Info', f'{name}停止'))
