"""
Recurrent Q-network with weight-shared vehicle sub-networks.

Every crossing-vehicle block goes through the same two tanh layers (W1, W2), the
ego's predicted accelerations through their own layer, and the results are summed
into a combining layer with one weight matrix per slot. An LSTM (or, for the DQN
ablation, a plain tanh layer) follows, and a linear head gives one Q-value per
short-term goal. Gradients are exact and hand-derived, including backpropagation
through time.
"""
from __future__ import annotations
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from config import NetworkConfig
from constants import MAX_OTHER_VEHICLES, NUM_ACTIONS, VEHICLE_FEATURES
from percept import Observation

class StructuralError(ValueError):
    pass

class TrainingError(ArithmeticError):
    pass


def sigmoid(x: np.ndarray) -> np.ndarray:
    # tanh form is stable for large |x|
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def slot_tensor_names(slot: int, share_weights: bool) -> tuple[str, str, str, str]:
    """Names of (W1, b1, W2, b2) used by a 0-based vehicle slot."""
    if share_weights:
        return "W1", "b1", "W2", "b2"
    return f"W1_{slot + 1}", f"b1_{slot + 1}", f"W2_{slot + 1}", f"b2_{slot + 1}"


def tensor_layout(config: NetworkConfig, use_lstm: bool = True, share_weights: bool = True) -> list[tuple[str, tuple[int, ...]]]:
    """
    Canonical name and shape of every tensor, in checkpoint order.
    Weight matrices are (out, in) so a layer is W @ x + b.
    """
    h1, h2, e, c, L = config.vehicle_hidden, config.vehicle_out, config.ego_hidden, config.combine, config.lstm
    layout: list[tuple[str, tuple[int, ...]]] = []
    slots = 1 if share_weights else MAX_OTHER_VEHICLES
    for slot in range(slots):
        w1, b1, w2, b2 = slot_tensor_names(slot, share_weights)
        layout += [(w1, (h1, VEHICLE_FEATURES)), (b1, (h1,)), (w2, (h2, h1)), (b2, (h2,))]
    layout += [("W_ego1", (e, NUM_ACTIONS)), ("b_ego", (e,)), ("W_ego2", (c, e))]
    layout += [(f"W3{k + 1}", (c, h2)) for k in range(MAX_OTHER_VEHICLES)]
    layout += [("b3", (c,))]
    if use_lstm:
        # Gate rows are stacked input, forget, output, candidate.
        layout += [("Wx_lstm", (4 * L, c)), ("Wh_lstm", (4 * L, L)), ("b_lstm", (4 * L,))]
    else:
        layout += [("W_ff", (L, c)), ("b_ff", (L,))]
    layout += [("W_Q", (NUM_ACTIONS, L)), ("b4", (NUM_ACTIONS,))]
    return layout


class NetworkParams:
    """All weights and biases of the network, plus the switches that shape it."""

    def __init__(self, tensors: dict[str, np.ndarray], config: NetworkConfig,
                 use_lstm: bool = True, share_weights: bool = True) -> None:
        self.config = config
        self.use_lstm = use_lstm
        self.share_weights = share_weights
        layout = tensor_layout(config, use_lstm, share_weights)
        if set(tensors) != {name for name, _ in layout}:
            raise StructuralError(f"tensor names {sorted(tensors)} don't match the layout")
        for name, shape in layout:
            if tensors[name].shape != shape:
                raise StructuralError(f"{name} has shape {tensors[name].shape}, expected {shape}")
        self.tensors = {name: np.asarray(tensors[name], dtype=np.float64) for name, _ in layout}

    @classmethod
    def zeros(cls, config: NetworkConfig, use_lstm: bool = True, share_weights: bool = True) -> NetworkParams:
        layout = tensor_layout(config, use_lstm, share_weights)
        return cls({name: np.zeros(shape) for name, shape in layout}, config, use_lstm, share_weights)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def names(self) -> list[str]:
        return list(self.tensors)

    def copy(self) -> NetworkParams:
        return NetworkParams({k: v.copy() for k, v in self.tensors.items()}, self.config, self.use_lstm, self.share_weights)

    def zeros_like(self) -> dict[str, np.ndarray]:
        return {k: np.zeros_like(v) for k, v in self.tensors.items()}

    @property
    def recurrent_width(self) -> int:
        return self.config.lstm

    def slot(self, slot: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        return tuple(self.tensors[n] for n in slot_tensor_names(slot, self.share_weights))


def init_params(config: NetworkConfig, rng: np.random.Generator,
                use_lstm: bool = True, share_weights: bool = True) -> NetworkParams:
    """
    Uniform +-sqrt(6/(fan_in+fan_out)) weights, zero biases, LSTM forget bias +1.
    LSTM gate blocks use the gate width as fan_out.
    """
    tensors = {}
    for name, shape in tensor_layout(config, use_lstm, share_weights):
        if len(shape) == 1:
            tensors[name] = np.zeros(shape)
            continue
        fan_out, fan_in = shape
        if name in ("Wx_lstm", "Wh_lstm"):
            fan_out = config.lstm
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        tensors[name] = rng.uniform(-limit, limit, size=shape)
    if use_lstm:
        tensors["b_lstm"][config.lstm:2 * config.lstm] = 1.0
    return NetworkParams(tensors, config, use_lstm, share_weights)


@dataclass(frozen=True)
class RecurrentState:
    hidden: np.ndarray
    cell: np.ndarray

    @classmethod
    def zeros(cls, width: int) -> RecurrentState:
        return cls(np.zeros(width), np.zeros(width))


@dataclass(frozen=True)
class DropoutMask:
    """
    Multipliers for the feed-forward activations, already divided by the keep
    probability. The LSTM recurrence is never masked.
    """

    vehicle_hidden: np.ndarray  # (MAX_OTHER_VEHICLES, vehicle_hidden)
    vehicle_out: np.ndarray     # (MAX_OTHER_VEHICLES, vehicle_out)
    ego: np.ndarray             # (ego_hidden,)
    combine: np.ndarray         # (combine,)


def sample_dropout_mask(config: NetworkConfig, rng: np.random.Generator, keep_prob: float | None = None) -> DropoutMask:
    keep = config.keep_prob if keep_prob is None else keep_prob

    def draw(shape: tuple[int, ...]) -> np.ndarray:
        return (rng.random(shape) < keep).astype(np.float64) / keep

    return DropoutMask(
        draw((MAX_OTHER_VEHICLES, config.vehicle_hidden)),
        draw((MAX_OTHER_VEHICLES, config.vehicle_out)),
        draw((config.ego_hidden,)),
        draw((config.combine,)),
    )


def _check_inputs(params: NetworkParams, obs: Observation, rstate: RecurrentState) -> None:
    if obs.xi.shape != (MAX_OTHER_VEHICLES, VEHICLE_FEATURES):
        raise StructuralError(f"vehicle blocks have shape {obs.xi.shape}")
    if obs.xi5.shape != (NUM_ACTIONS,):
        raise StructuralError(f"ego block has shape {obs.xi5.shape}")
    width = params.recurrent_width
    if rstate.hidden.shape != (width,) or rstate.cell.shape != (width,):
        raise StructuralError(f"recurrent state doesn't match LSTM width {width}")


def _lstm_gates(params: NetworkParams, x: np.ndarray, rstate: RecurrentState) -> tuple[np.ndarray, ...]:
    L = params.recurrent_width
    pre = params["Wx_lstm"] @ x + params["Wh_lstm"] @ rstate.hidden + params["b_lstm"]
    i = sigmoid(pre[:L])
    f = sigmoid(pre[L:2 * L])
    o = sigmoid(pre[2 * L:3 * L])
    g = np.tanh(pre[3 * L:])
    cell = f * rstate.cell + i * g
    return i, f, o, g, cell, np.tanh(cell)


def lstm_step(params: NetworkParams, x: np.ndarray, rstate: RecurrentState) -> tuple[np.ndarray, RecurrentState]:
    """
    One LSTM cell update: cell' = f*cell + i*g, hidden' = o*tanh(cell').

    :raises StructuralError: on dimension mismatch.
    """
    if not params.use_lstm:
        raise StructuralError("network was built without an LSTM layer")
    if x.shape != (params["Wx_lstm"].shape[1],):
        raise StructuralError(f"LSTM input has shape {x.shape}")
    width = params.recurrent_width
    if rstate.hidden.shape != (width,) or rstate.cell.shape != (width,):
        raise StructuralError(f"recurrent state doesn't match LSTM width {width}")
    _, _, o, _, cell, tanh_cell = _lstm_gates(params, x, rstate)
    hidden = o * tanh_cell
    return hidden, RecurrentState(hidden, cell)


def _forward_step(params: NetworkParams, obs: Observation, rstate: RecurrentState,
                  mask: Optional[DropoutMask]) -> tuple[np.ndarray, RecurrentState, dict]:
    _check_inputs(params, obs, rstate)
    cache: dict = {"xi": obs.xi, "xi5": obs.xi5, "h1": [], "h1d": [], "h2": [], "h2d": [], "state": rstate}
    z3 = params["b3"].copy()
    for slot in range(MAX_OTHER_VEHICLES):
        W1, b1, W2, b2 = params.slot(slot)
        h1 = np.tanh(W1 @ obs.xi[slot] + b1)
        h1d = h1 * mask.vehicle_hidden[slot] if mask is not None else h1
        h2 = np.tanh(W2 @ h1d + b2)
        h2d = h2 * mask.vehicle_out[slot] if mask is not None else h2
        z3 += params[f"W3{slot + 1}"] @ h2d
        cache["h1"].append(h1)
        cache["h1d"].append(h1d)
        cache["h2"].append(h2)
        cache["h2d"].append(h2d)
    hego = np.tanh(params["W_ego1"] @ obs.xi5 + params["b_ego"])
    hegod = hego * mask.ego if mask is not None else hego
    z3 += params["W_ego2"] @ hegod
    h3 = np.tanh(z3)
    h3d = h3 * mask.combine if mask is not None else h3
    cache.update(hego=hego, hegod=hegod, h3=h3, h3d=h3d)

    if params.use_lstm:
        i, f, o, g, cell, tanh_cell = _lstm_gates(params, h3d, rstate)
        h4 = o * tanh_cell
        new_state = RecurrentState(h4, cell)
        cache.update(i=i, f=f, o=o, g=g, tanh_cell=tanh_cell)
    else:
        h4 = np.tanh(params["W_ff"] @ h3d + params["b_ff"])
        new_state = rstate
    cache["h4"] = h4
    q = params["W_Q"] @ h4 + params["b4"]
    return q, new_state, cache


def forward(params: NetworkParams, obs: Observation, rstate: RecurrentState,
            dropout_mask: Optional[DropoutMask] = None) -> tuple[np.ndarray, RecurrentState]:
    """
    Q-values of the six actions and the updated recurrent state.
    Inference passes no dropout mask.

    :raises StructuralError: on dimension mismatch.
    """
    q, new_state, _ = _forward_step(params, obs, rstate, dropout_mask)
    return q, new_state


def forward_sequence(params: NetworkParams, observations: Sequence[Observation],
                     rstate: RecurrentState | None = None,
                     dropout_mask: Optional[DropoutMask] = None) -> list[np.ndarray]:
    """Q-values along a sequence, starting from `rstate` (zeros by default)."""
    state = rstate if rstate is not None else RecurrentState.zeros(params.recurrent_width)
    out = []
    for obs in observations:
        q, state = forward(params, obs, state, dropout_mask)
        out.append(q)
    return out


def backward(params: NetworkParams, steps: Sequence[tuple[Observation, Optional[int], Optional[float]]],
             burn_in: int, rstate: RecurrentState | None = None,
             dropout_mask: Optional[DropoutMask] = None) -> tuple[float, dict[str, np.ndarray]]:
    """
    Loss and exact gradients for one sequence of (observation, action, td_target).

    The loss is the mean squared TD error over the steps after the burn-in. Burn-in
    steps contribute no loss but gradients still flow back through their recurrent
    states. The same dropout mask is used at every step.

    :raises StructuralError: when burn_in leaves no trained step or a trained step
        lacks its action or target.
    """
    T = len(steps)
    if T == 0 or not 0 <= burn_in < T:
        raise StructuralError(f"burn_in {burn_in} invalid for a sequence of {T}")
    for obs, action, target in steps[burn_in:]:
        if action is None or target is None:
            raise StructuralError("trained steps need both an action and a TD target")
        if not 0 <= action < NUM_ACTIONS:
            raise StructuralError(f"action {action} out of range")

    state = rstate if rstate is not None else RecurrentState.zeros(params.recurrent_width)
    caches = []
    qs = []
    for obs, _, _ in steps:
        q, state, cache = _forward_step(params, obs, state, dropout_mask)
        caches.append(cache)
        qs.append(q)

    n_trained = T - burn_in
    loss = 0.0
    dqs = [np.zeros(NUM_ACTIONS) for _ in range(T)]
    for t in range(burn_in, T):
        _, action, target = steps[t]
        residual = qs[t][action] - target
        loss += residual * residual / n_trained
        dqs[t][action] = 2.0 * residual / n_trained

    grads = params.zeros_like()
    L = params.recurrent_width
    dh_next = np.zeros(L)
    dc_next = np.zeros(L)
    for t in reversed(range(T)):
        cache = caches[t]
        dq = dqs[t]
        h4 = cache["h4"]
        grads["W_Q"] += np.outer(dq, h4)
        grads["b4"] += dq
        dh4 = params["W_Q"].T @ dq + dh_next

        if params.use_lstm:
            i, f, o, g, tanh_cell = cache["i"], cache["f"], cache["o"], cache["g"], cache["tanh_cell"]
            prev = cache["state"]
            dcell = dh4 * o * (1.0 - tanh_cell ** 2) + dc_next
            dpre = np.concatenate([
                dcell * g * i * (1.0 - i),
                dcell * prev.cell * f * (1.0 - f),
                dh4 * tanh_cell * o * (1.0 - o),
                dcell * i * (1.0 - g ** 2),
            ])
            grads["Wx_lstm"] += np.outer(dpre, cache["h3d"])
            grads["Wh_lstm"] += np.outer(dpre, prev.hidden)
            grads["b_lstm"] += dpre
            dh3d = params["Wx_lstm"].T @ dpre
            dh_next = params["Wh_lstm"].T @ dpre
            dc_next = dcell * f
        else:
            dz = dh4 * (1.0 - h4 ** 2)
            grads["W_ff"] += np.outer(dz, cache["h3d"])
            grads["b_ff"] += dz
            dh3d = params["W_ff"].T @ dz

        dh3 = dh3d * dropout_mask.combine if dropout_mask is not None else dh3d
        dz3 = dh3 * (1.0 - cache["h3"] ** 2)
        grads["b3"] += dz3

        grads["W_ego2"] += np.outer(dz3, cache["hegod"])
        dhego = params["W_ego2"].T @ dz3
        if dropout_mask is not None:
            dhego = dhego * dropout_mask.ego
        dzego = dhego * (1.0 - cache["hego"] ** 2)
        grads["W_ego1"] += np.outer(dzego, cache["xi5"])
        grads["b_ego"] += dzego

        for slot in range(MAX_OTHER_VEHICLES):
            w1, b1, w2, b2 = slot_tensor_names(slot, params.share_weights)
            w3 = f"W3{slot + 1}"
            grads[w3] += np.outer(dz3, cache["h2d"][slot])
            dh2 = params[w3].T @ dz3
            if dropout_mask is not None:
                dh2 = dh2 * dropout_mask.vehicle_out[slot]
            dz2 = dh2 * (1.0 - cache["h2"][slot] ** 2)
            grads[w2] += np.outer(dz2, cache["h1d"][slot])
            grads[b2] += dz2
            dh1 = params[w2].T @ dz2
            if dropout_mask is not None:
                dh1 = dh1 * dropout_mask.vehicle_hidden[slot]
            dz1 = dh1 * (1.0 - cache["h1"][slot] ** 2)
            grads[w1] += np.outer(dz1, cache["xi"][slot])
            grads[b1] += dz1
    return float(loss), grads


def global_norm(grads: dict[str, np.ndarray]) -> float:
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))


def clip_gradients(grads: dict[str, np.ndarray], threshold: float) -> tuple[dict[str, np.ndarray], float]:
    """Rescale all gradients together so their global norm is at most `threshold`."""
    norm = global_norm(grads)
    if norm <= threshold:
        return grads, norm
    scale = threshold / norm
    return {k: g * scale for k, g in grads.items()}, norm


@dataclass(frozen=True)
class OptimizerState:
    """RMS-adaptive step: a running mean of squared gradients per tensor."""

    mean_square: dict[str, np.ndarray]
    learning_rate: float
    decay: float
    epsilon: float
    grad_clip: float
    steps: int = 0

    @classmethod
    def create(cls, params: NetworkParams, config: NetworkConfig | None = None) -> OptimizerState:
        config = config if config is not None else params.config
        return cls(params.zeros_like(), config.learning_rate, config.rms_decay, config.rms_epsilon, config.grad_clip)


def apply_gradients(params: NetworkParams, grads: dict[str, np.ndarray],
                    state: OptimizerState) -> tuple[NetworkParams, OptimizerState]:
    """
    Clip by global norm, then take one RMS-adaptive step. Inputs aren't mutated.

    :raises StructuralError: when gradients don't match the parameters.
    :raises TrainingError: when any gradient is non-finite.
    """
    if set(grads) != set(params.tensors):
        raise StructuralError("gradient names don't match the parameters")
    for name, g in grads.items():
        if g.shape != params[name].shape:
            raise StructuralError(f"gradient {name} has shape {g.shape}, expected {params[name].shape}")
    bad = [name for name, g in grads.items() if not np.all(np.isfinite(g))]
    if bad:
        raise TrainingError(f"non-finite gradients in {', '.join(bad)} at optimizer step {state.steps}")

    clipped, _ = clip_gradients(grads, state.grad_clip)
    tensors = {}
    mean_square = {}
    for name, value in params.tensors.items():
        g = clipped[name]
        ms = state.decay * state.mean_square[name] + (1.0 - state.decay) * g * g
        tensors[name] = value - state.learning_rate * g / (np.sqrt(ms) + state.epsilon)
        mean_square[name] = ms
    new_state = OptimizerState(mean_square, state.learning_rate, state.decay, state.epsilon, state.grad_clip, state.steps + 1)
    return NetworkParams(tensors, params.config, params.use_lstm, params.share_weights), new_state
