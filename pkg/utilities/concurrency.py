import concurrent.futures
from typing import Callable, Sequence, TypeVar

__all__ = [
    "parallel_map",
]

TASK_INPUT = TypeVar("TASK_INPUT")
TASK_OUTPUT = TypeVar("TASK_OUTPUT")


def parallel_map(
        function: Callable[[TASK_INPUT], TASK_OUTPUT],
        inputs: Sequence[TASK_INPUT],
        max_workers: int | None = None,
) -> list[TASK_OUTPUT]:
    """
    Apply a function to every input concurrently and return the outputs in input order.
    The result never depends on the number of workers; with ``max_workers=1`` the inputs are processed serially
    in the calling thread.

    :param function: A pure function of one input
    :param inputs: The inputs to process
    :param max_workers: An optional maximum number of worker threads
    :return: The outputs, aligned with ``inputs``
    """
    if max_workers is None:
        max_workers = max(1, len(inputs))
    else:
        max_workers = max(1, min(max_workers, len(inputs)))

    if max_workers == 1:
        return [function(item) for item in inputs]

    executor = concurrent.futures.ThreadPoolExecutor(max_workers=max_workers)
    try:
        futures = [executor.submit(function, item) for item in inputs]
        return [future.result() for future in futures]
    finally:
        executor.shutdown(wait=True, cancel_futures=True)
