from concurrent.futures import ProcessPoolExecutor, as_completed
from typing import Callable, List, Sequence, TypeVar

from tqdm import tqdm

T = TypeVar("T")
R = TypeVar("R")


def parallel_map(items: Sequence[T], function: Callable[[T], R], n_jobs: int = 1, desc: str = None) -> List[R]:
    """
        A parallel version of the map function with a progress bar.

        Args:
            items (sequence): Elements to apply function to.
            function (callable): A picklable top-level function (or functools.partial of one).
            n_jobs (int, default=1): The number of processes to use. 1 runs serially in-process.
            desc (str): Progress bar label.
        Returns:
            [function(items[0]), function(items[1]), ...] in input order.
        Raises:
            The first exception raised by a worker, in input order.
    """
    items = list(items)
    kwargs = {
        'total': len(items),
        'unit': 'it',
        'leave': False,
        'desc': desc,
        'disable': len(items) < 2,
    }
    # If we set n_jobs to 1, just run a list comprehension. This is useful for benchmarking and debugging.
    if n_jobs == 1 or len(items) < 2:
        return [function(item) for item in tqdm(items, **kwargs)]
    # Assemble the workers
    with ProcessPoolExecutor(max_workers=min(n_jobs, len(items))) as pool:
        futures = [pool.submit(function, item) for item in items]
        # Print out the progress as tasks complete
        for _ in tqdm(as_completed(futures), **kwargs):
            pass
    # Results are collected in submission order so output does not depend on scheduling
    return [future.result() for future in futures]
