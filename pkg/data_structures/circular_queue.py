""" Fixed-capacity queue on a circular array. """

from __future__ import annotations

__docformat__ = 'reStructuredText'

from data_structures.queue_adt import Queue, T


class CircularQueue(Queue[T]):
    """ Bounded queue on a circular array, indexable from the front.

        Attributes:
            length (int): number of elements in the queue (inherited)
            front (int): index of the element at the front
            rear (int): index of the first empty slot at the rear
            array (list[T]): circular storage of max_capacity slots
    """

    def __init__(self, max_capacity: int) -> None:
        """ Object initializer.
            :raises ValueError: if max_capacity is not positive.
        """
        if max_capacity <= 0:
            raise ValueError('Capacity should be larger than 0.')
        Queue.__init__(self)
        self.front = 0
        self.rear = 0
        self.array: list[T | None] = [None] * max_capacity

    def append(self, item: T) -> None:
        """ Adds an element to the rear of the queue.
            :pre: queue is not full
            :complexity: O(1)
            :raises Exception: if the queue is full
        """
        if self.is_full():
            raise Exception('Queue is full')
        self.array[self.rear] = item
        self.length += 1
        self.rear = (self.rear + 1) % len(self.array)

    def serve(self) -> T:
        """ Deletes and returns the element at the front of the queue.
            :pre: queue is not empty
            :complexity: O(1)
            :raises Exception: if the queue is empty
        """
        if self.is_empty():
            raise Exception('Queue is empty')
        item = self.array[self.front]
        self.array[self.front] = None
        self.length -= 1
        self.front = (self.front + 1) % len(self.array)
        return item

    def peek(self) -> T:
        """ Returns the element at the front without removing it.
            :pre: queue is not empty
            :complexity: O(1)
            :raises Exception: if the queue is empty
        """
        if self.is_empty():
            raise Exception('Queue is empty')
        return self.array[self.front]

    def __getitem__(self, index: int) -> T:
        """ Returns the element `index` places behind the front.
            :complexity: O(1)
            :raises IndexError: if index is out of range
        """
        if not 0 <= index < self.length:
            raise IndexError(f'Queue index {index} out of range')
        return self.array[(self.front + index) % len(self.array)]

    def is_full(self) -> bool:
        """ True if the queue is full and no element can be appended.
            :complexity: O(1)
        """
        return self.length == len(self.array)

    def clear(self) -> None:
        """ Clears all elements from the queue.
            :complexity: O(n) in the capacity
        """
        Queue.clear(self)
        self.front = 0
        self.rear = 0
        self.array = [None] * len(self.array)
