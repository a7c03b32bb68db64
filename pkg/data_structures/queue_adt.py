"""
    Bounded FIFO queue ADT, indexable from the front. The replay buffer keeps
    its episodes in one, evicting the oldest when full.
"""

from __future__ import annotations

__docformat__ = 'reStructuredText'

from abc import ABC, abstractmethod
from typing import Generic, Iterator, TypeVar
T = TypeVar('T')


class Queue(ABC, Generic[T]):
    def __init__(self) -> None:
        self.length = 0

    @abstractmethod
    def append(self, item: T) -> None:
        """ Adds an element at the rear; raises when full. """

    @abstractmethod
    def serve(self) -> T:
        """ Removes and returns the front element; raises when empty. """

    @abstractmethod
    def peek(self) -> T:
        ...

    @abstractmethod
    def __getitem__(self, index: int) -> T:
        """ Element `index` places behind the front. """

    @abstractmethod
    def is_full(self) -> bool:
        ...

    def push_evicting(self, item: T) -> T | None:
        """ Appends, serving the front first when full. Returns the evicted element, if any.
            :complexity: O(1) plus the cost of serve and append
        """
        evicted = self.serve() if self.is_full() else None
        self.append(item)
        return evicted

    def __iter__(self) -> Iterator[T]:
        """ Front to rear. """
        for i in range(len(self)):
            yield self[i]

    def __len__(self) -> int:
        return self.length

    def is_empty(self) -> bool:
        return len(self) == 0

    def clear(self) -> None:
        self.length = 0
