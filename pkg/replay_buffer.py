"""
Episode-aware experience replay.

Transitions are stored per episode so that a sampled sequence never spans two
episodes, and eviction always drops a whole episode from the front.
"""
from __future__ import annotations
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from algorithms.binary_search import locate_bucket
from data_structures.circular_queue import CircularQueue
from percept import Observation

class NotReadyError(LookupError):
    pass


@dataclass(frozen=True)
class Experience:
    obs: Observation
    action: int
    reward: float
    next_obs: Observation
    terminal: bool
    episode_id: int
    step_index: int


@dataclass(frozen=True)
class SampledSequence:
    """Consecutive transitions of one episode. The first `burn_in` only warm the LSTM."""

    experiences: tuple[Experience, ...]
    burn_in: int

    def __len__(self) -> int:
        return len(self.experiences)

    @property
    def trained(self) -> tuple[Experience, ...]:
        return self.experiences[self.burn_in:]


def check_episode(experiences: Sequence[Experience]) -> None:
    """
    :raises ValueError: unless the transitions form one contiguous episode
        that is terminal only at its last step.
    """
    if not experiences:
        raise ValueError("an episode needs at least one transition")
    episode_id = experiences[0].episode_id
    for k, e in enumerate(experiences):
        if e.episode_id != episode_id:
            raise ValueError(f"transition {k} belongs to episode {e.episode_id}, not {episode_id}")
        if e.step_index != k:
            raise ValueError(f"episode {episode_id} has step {e.step_index} at position {k}")
        if e.terminal and k != len(experiences) - 1:
            raise ValueError(f"episode {episode_id} is terminal before its last transition")


class ReplayBuffer:
    """
    Bounded store of whole episodes.

    Attributes:
        capacity (int): maximum number of transitions held
        episodes (CircularQueue): stored episodes, oldest at the front
    """

    def __init__(self, capacity: int) -> None:
        if capacity < 1:
            raise ValueError("replay capacity must be at least 1")
        self.capacity = capacity
        # Every episode holds at least one transition.
        self.episodes: CircularQueue[tuple[Experience, ...]] = CircularQueue(capacity)
        self.size = 0
        self._cumulative: list[int] | None = None

    def __len__(self) -> int:
        """ Number of stored transitions. """
        return self.size

    @property
    def n_episodes(self) -> int:
        return len(self.episodes)

    def add_episode(self, experiences: Sequence[Experience]) -> list[int]:
        """
        Store one finished episode, evicting the oldest episodes until it fits.
        Returns the ids of evicted episodes.

        :complexity: O(n) in the episode length plus O(1) per eviction.
        :raises ValueError: if the episode is malformed or longer than the capacity.
        """
        check_episode(experiences)
        if len(experiences) > self.capacity:
            raise ValueError(f"episode of {len(experiences)} transitions exceeds capacity {self.capacity}")
        evicted = []
        while self.size + len(experiences) > self.capacity:
            oldest = self.episodes.serve()
            self.size -= len(oldest)
            evicted.append(oldest[0].episode_id)
        self.episodes.append(tuple(experiences))
        self.size += len(experiences)
        self._cumulative = None
        return evicted

    def __iter__(self) -> Iterator[tuple[Experience, ...]]:
        return iter(self.episodes)

    def latest_episode(self) -> tuple[Experience, ...]:
        """
        :raises NotReadyError: if nothing is stored.
        """
        if self.episodes.is_empty():
            raise NotReadyError("replay buffer is empty")
        return self.episodes[len(self.episodes) - 1]

    def get(self, episode_id: int, step_index: int) -> Experience:
        """
        :complexity: O(E) in the number of stored episodes.
        :raises KeyError: if that transition isn't (or is no longer) stored.
        """
        for episode in self.episodes:
            if episode[0].episode_id == episode_id and 0 <= step_index < len(episode):
                return episode[step_index]
        raise KeyError((episode_id, step_index))

    def cumulative_sizes(self) -> list[int]:
        if self._cumulative is None:
            total = 0
            cumulative = []
            for episode in self.episodes:
                total += len(episode)
                cumulative.append(total)
            self._cumulative = cumulative
        return self._cumulative

    def clear(self) -> None:
        self.episodes.clear()
        self.size = 0
        self._cumulative = None


def sequence_ending_at(episode: Sequence[Experience], end_index: int,
                       sequence_length: int, train_steps: int = 1) -> SampledSequence:
    """
    The `sequence_length` transitions ending at `end_index`. Near the episode start the
    sequence is shorter and the burn-in shrinks; the trained steps are kept while possible.
    """
    start = max(0, end_index - sequence_length + 1)
    experiences = tuple(episode[start:end_index + 1])
    trained = min(train_steps, len(experiences))
    return SampledSequence(experiences, len(experiences) - trained)


def sample_sequences(buffer: ReplayBuffer, batch_size: int, sequence_length: int,
                     rng: np.random.Generator, train_steps: int = 1) -> list[SampledSequence]:
    """
    Draw `batch_size` sequences whose end transitions are uniform over everything stored.

    :raises NotReadyError: if the buffer is empty.
    """
    if len(buffer) == 0:
        raise NotReadyError("replay buffer is empty")
    cumulative = buffer.cumulative_sizes()
    batch = []
    for flat in rng.integers(0, len(buffer), size=batch_size):
        k = locate_bucket(cumulative, int(flat))
        end_index = int(flat) - (cumulative[k - 1] if k > 0 else 0)
        batch.append(sequence_ending_at(buffer.episodes[k], end_index, sequence_length, train_steps))
    return batch


def episode_sequences(episode: Sequence[Experience], sequence_length: int,
                      train_steps: int = 1) -> list[SampledSequence]:
    """One sequence per transition of the episode, in order."""
    return [sequence_ending_at(episode, t, sequence_length, train_steps) for t in range(len(episode))]
