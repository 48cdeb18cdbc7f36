"""Thread pool for independent sweep samples."""

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

T = TypeVar('T')
R = TypeVar('R')


def thread_count() -> int:
  """Worker threads, capped by ``LAB_THREADS`` (default: CPU count)."""
  default = os.cpu_count() or 1
  try:
    requested = int(os.getenv('LAB_THREADS', default))
  except ValueError:
    requested = default
  return max(1, min(requested, default))


def map_ordered(fn: Callable[[T], R], items: Iterable[T]) -> list[R]:
  """Apply ``fn`` to every item concurrently; results keep the input order."""
  items = list(items)
  workers = min(thread_count(), len(items))
  if workers <= 1:
    return [fn(item) for item in items]
  with ThreadPoolExecutor(max_workers=workers) as pool:
    return list(pool.map(fn, items))
