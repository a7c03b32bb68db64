from __future__ import annotations
from dataclasses import dataclass

import numpy as np

@dataclass(frozen=True)
class TabularMdp:
    """
    A deterministic tabular MDP.
    `transitions[s][a]` is (next_state, reward); next_state None ends the episode.
    """

    transitions: tuple[tuple[tuple[int | None, float], ...], ...]

    @property
    def n_states(self) -> int:
        return len(self.transitions)

    @property
    def n_actions(self) -> int:
        return len(self.transitions[0])

    def step(self, state: int, action: int) -> tuple[int | None, float]:
        return self.transitions[state][action]


def chain_mdp(n_states: int = 3, goal_reward: float = 1.0) -> TabularMdp:
    """
    Corridor of `n_states` cells. Action 0 moves left (staying put at the left wall),
    action 1 moves right; moving right off the last cell pays `goal_reward` and ends.
    """
    rows = []
    for s in range(n_states):
        left = (max(s - 1, 0), 0.0)
        right = (None, goal_reward) if s == n_states - 1 else (s + 1, 0.0)
        rows.append((left, right))
    return TabularMdp(tuple(rows))


def value_iteration(mdp: TabularMdp, gamma: float, tol: float = 1e-12, max_iter: int = 10000) -> np.ndarray:
    """
    Optimal action values Q*(s, a) by repeated Bellman backups.

    :complexity: O(max_iter * S * A)
    :raises ValueError: if gamma is outside [0, 1) or it fails to converge.
    """
    if not 0 <= gamma < 1:
        raise ValueError(f"gamma must lie in [0, 1), got {gamma}")
    q = np.zeros((mdp.n_states, mdp.n_actions))
    for _ in range(max_iter):
        v = q.max(axis=1)
        new_q = np.empty_like(q)
        for s in range(mdp.n_states):
            for a in range(mdp.n_actions):
                nxt, reward = mdp.step(s, a)
                new_q[s, a] = reward + (0.0 if nxt is None else gamma * v[nxt])
        if np.max(np.abs(new_q - q)) < tol:
            return new_q
        q = new_q
    raise ValueError("value iteration did not converge")
