from functools import wraps
from queue import Queue
from threading import Thread

def _call_into(q: Queue, method, args, kwargs) -> None:
    try:
        q.put((True, method(*args, **kwargs)))
    except BaseException as e:
        q.put((False, e))

def timeout(sec: float = 60):
    """
    Fail a test that runs longer than `sec` seconds.
    The worker thread can't be killed, so it is left running as a daemon.
    """
    def timeout_dec(func):
        @wraps(func)
        def test(*args, **kwargs):
            q: Queue = Queue()
            worker = Thread(target=_call_into, args=(q, func, args, kwargs), daemon=True)
            worker.start()
            worker.join(sec)
            if worker.is_alive():
                raise TimeoutError(f"Timed out after {sec} seconds")
            ok, value = q.get()
            if not ok:
                raise value
            return value
        return test
    return timeout_dec
