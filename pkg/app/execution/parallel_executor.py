"""
Parallel executor for running independent trials concurrently.
"""
import asyncio
import time
from typing import Callable, List, Optional, Sequence, TypeVar

from ..config.logging_config import logger
from ..config.settings import settings

T = TypeVar("T")


class ParallelExecutor:
    """
    Runs blocking trial functions on worker threads.

    Results come back in the order the tasks were given, so callers that sort
    tasks by seed get seed-ordered output regardless of completion order.
    """

    def __init__(self, workers: Optional[int] = None):
        self.workers = workers or settings.harness.workers

    async def execute(self, tasks: Sequence[Callable[[], T]]) -> List[T]:
        """
        Run every task, at most `workers` at a time.

        Args:
            tasks: Zero-argument callables.

        Returns:
            List[T]: One result per task, in task order.
        """
        if not tasks:
            return []
        start_time = time.time()
        semaphore = asyncio.Semaphore(self.workers)

        async def run(index: int, task: Callable[[], T]) -> T:
            async with semaphore:
                try:
                    return await asyncio.to_thread(task)
                except Exception as e:
                    logger.error(f"Task {index} failed: {str(e)}")
                    raise

        results = await asyncio.gather(*(run(i, t) for i, t in enumerate(tasks)))
        logger.info(f"Ran {len(tasks)} tasks on {self.workers} workers in {time.time() - start_time:.2f}s")
        return list(results)

    def run(self, tasks: Sequence[Callable[[], T]]) -> List[T]:
        """Blocking wrapper around `execute`."""
        return asyncio.run(self.execute(tasks))
