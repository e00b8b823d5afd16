# laryngen/cache.py
"""
In-process cache for decoded, stripped backgrounds.

A batch reuses a handful of backgrounds round-robin; decoding and stripping
each one once per worker keeps the per-image cost down to generation itself.
"""

from collections import OrderedDict
from typing import Any, Hashable, Optional


class Cache:
    """
    Least-recently-used cache with a fixed capacity.

    Not thread-safe; each worker process holds its own instance.
    """

    def __init__(self, max_size: int = 32):
        """
        Initialize cache.

        Args:
            max_size: Maximum number of items kept; the least recently used
                item is evicted first
        """
        if max_size < 1:
            raise ValueError("max_size must be at least 1")
        self._items: "OrderedDict[Hashable, Any]" = OrderedDict()
        self._max_size = max_size
        self.hits = 0
        self.misses = 0

    def get(self, key: Hashable) -> Optional[Any]:
        """
        Get item from cache.

        Args:
            key: Cache key

        Returns:
            Optional[Any]: Cached value or None if not found
        """
        if key not in self._items:
            self.misses += 1
            return None
        self.hits += 1
        self._items.move_to_end(key)
        return self._items[key]

    def set(self, key: Hashable, value: Any) -> None:
        """
        Set item in cache.

        Args:
            key: Cache key
            value: Value to cache
        """
        self._items[key] = value
        self._items.move_to_end(key)
        while len(self._items) > self._max_size:
            self._items.popitem(last=False)

    def delete(self, key: Hashable) -> None:
        self._items.pop(key, None)

    def clear(self) -> None:
        self._items.clear()
        self.hits = self.misses = 0

    def size(self) -> int:
        return len(self._items)

    def __contains__(self, key: Hashable) -> bool:
        return key in self._items


# Global cache instance
_default_cache: Optional[Cache] = None


def get_default_cache() -> Cache:
    """
    Get the process-wide background cache.

    Returns:
        Cache: Default cache instance
    """
    global _default_cache
    if _default_cache is None:
        _default_cache = Cache()
    return _default_cache
