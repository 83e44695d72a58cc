"""
Fixed-capacity ring store.
Keeps the most recent items and evicts the oldest one once the size limit is exceeded.
"""

from __future__ import annotations

from typing import Generic, Iterator, Optional, TypeVar


T = TypeVar("T")


class RingCache(Generic[T]):
    """FIFO ring with O(1) append and positional reads"""

    def __init__(self, max_size: int = 100):
        """
        Initialize the ring.

        Args:
            max_size: Maximum number of items to keep before evicting the oldest
        """
        if max_size < 1:
            raise ValueError("max_size must be at least 1")
        self.max_size = max_size
        self._items: list[Optional[T]] = []
        self._next = 0

    def append(self, item: T) -> Optional[T]:
        """
        Store an item, evicting the oldest one when full.

        Args:
            item: Value to store

        Returns:
            The evicted item, or None when nothing was evicted
        """
        if len(self._items) < self.max_size:
            self._items.append(item)
            return None
        evicted = self._items[self._next]
        self._items[self._next] = item
        self._next = (self._next + 1) % self.max_size
        return evicted

    def __getitem__(self, position: int) -> T:
        """Item by age: position 0 is the oldest item still stored"""
        if not 0 <= position < len(self._items):
            raise IndexError(position)
        if len(self._items) < self.max_size:
            return self._items[position]
        return self._items[(self._next + position) % self.max_size]

    def __iter__(self) -> Iterator[T]:
        for position in range(len(self)):
            yield self[position]

    def __len__(self) -> int:
        """Return the current number of items."""
        return len(self._items)
