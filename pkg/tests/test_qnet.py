import math
import unittest
from dataclasses import replace

import numpy as np

from algorithms.finite_difference import central_difference, relative_error
from constants import NUM_ACTIONS
from percept import Observation
from qnet import (
    NetworkParams, OptimizerState, RecurrentState, StructuralError, TrainingError,
    apply_gradients, backward, clip_gradients, forward, forward_sequence, global_norm,
    init_params, lstm_step, sample_dropout_mask, sigmoid, tensor_layout,
)
from test_utils.decorators import number
from tests.helpers import SMALL_NETWORK, random_observation, random_params

GRAD_TOLERANCE = 1e-4


def scalar_forward(params, obs, rstate):
    """Independent loop-over-scalars evaluation of the network, used as an oracle."""
    def dense(W, x, b, act=math.tanh):
        return [act(sum(W[r][c] * x[c] for c in range(len(x))) + b[r]) for r in range(len(W))]

    def matvec(W, x):
        return [sum(W[r][c] * x[c] for c in range(len(x))) for r in range(len(W))]

    P = {k: v.tolist() for k, v in params.tensors.items()}
    z3 = list(P["b3"])
    for slot in range(4):
        suffix = "" if params.share_weights else f"_{slot + 1}"
        h1 = dense(P["W1" + suffix], obs.xi[slot].tolist(), P["b1" + suffix])
        h2 = dense(P["W2" + suffix], h1, P["b2" + suffix])
        z3 = [a + b for a, b in zip(z3, matvec(P[f"W3{slot + 1}"], h2))]
    hego = dense(P["W_ego1"], obs.xi5.tolist(), P["b_ego"])
    z3 = [a + b for a, b in zip(z3, matvec(P["W_ego2"], hego))]
    h3 = [math.tanh(z) for z in z3]
    L = params.config.lstm
    if params.use_lstm:
        pre = [a + b + c for a, b, c in zip(matvec(P["Wx_lstm"], h3), matvec(P["Wh_lstm"], rstate.hidden.tolist()), P["b_lstm"])]
        sig = lambda z: 1.0 / (1.0 + math.exp(-z))
        cell = [sig(pre[L + j]) * rstate.cell[j] + sig(pre[j]) * math.tanh(pre[3 * L + j]) for j in range(L)]
        h4 = [sig(pre[2 * L + j]) * math.tanh(cell[j]) for j in range(L)]
    else:
        h4 = dense(P["W_ff"], h3, P["b_ff"])
        cell = rstate.cell.tolist()
    q = [a + b for a, b in zip(matvec(P["W_Q"], h4), P["b4"])]
    return np.array(q), np.array(h4), np.array(cell)


def random_state(rng, width=SMALL_NETWORK.lstm):
    return RecurrentState(rng.uniform(-1.0, 1.0, width), rng.uniform(-1.0, 1.0, width))


def random_steps(rng, length, burn_in):
    return [
        (random_observation(rng, hidden_slots=int(rng.integers(0, 3))),
         int(rng.integers(0, NUM_ACTIONS)) if t >= burn_in else None,
         float(rng.normal()) if t >= burn_in else None)
        for t in range(length)
    ]


class TestForward(unittest.TestCase):

    @number("5.1")
    def test_zero_params(self):
        params = NetworkParams.zeros(SMALL_NETWORK)
        obs = random_observation(np.random.default_rng(0))
        q, state = forward(params, obs, RecurrentState.zeros(SMALL_NETWORK.lstm))
        np.testing.assert_array_equal(q, np.zeros(NUM_ACTIONS))
        np.testing.assert_array_equal(state.hidden, 0.0)
        np.testing.assert_array_equal(state.cell, 0.0)

    @number("5.2")
    def test_layout(self):
        names = [name for name, _ in tensor_layout(SMALL_NETWORK)]
        self.assertEqual(names[:4], ["W1", "b1", "W2", "b2"])
        self.assertEqual(names[-2:], ["W_Q", "b4"])
        self.assertIn("Wh_lstm", names)
        unshared = [name for name, _ in tensor_layout(SMALL_NETWORK, use_lstm=False, share_weights=False)]
        self.assertEqual(unshared[:8], ["W1_1", "b1_1", "W2_1", "b2_1", "W1_2", "b1_2", "W2_2", "b2_2"])
        self.assertIn("W_ff", unshared)
        self.assertNotIn("Wh_lstm", unshared)
        shapes = dict(tensor_layout(SMALL_NETWORK))
        self.assertEqual(shapes["Wx_lstm"], (4 * SMALL_NETWORK.lstm, SMALL_NETWORK.combine))
        self.assertEqual(shapes["W_Q"], (NUM_ACTIONS, SMALL_NETWORK.lstm))

    @number("5.3")
    def test_slot_swap_with_shared_weights(self):
        """Shared vehicle layers: swapping two slots together with their combining weights changes nothing."""
        rng = np.random.default_rng(1)
        params = random_params(rng)
        obs = random_observation(rng)
        state = random_state(rng)
        q, _ = forward(params, obs, state)

        swapped_xi = obs.xi[[1, 0, 2, 3]]
        tensors = {k: v.copy() for k, v in params.tensors.items()}
        tensors["W31"], tensors["W32"] = params["W32"].copy(), params["W31"].copy()
        swapped = NetworkParams(tensors, params.config)
        q_swapped, _ = forward(swapped, Observation(swapped_xi, obs.xi5, obs.visible_mask[[1, 0, 2, 3]]), state)
        np.testing.assert_allclose(q_swapped, q, rtol=1e-12, atol=1e-12)

        for k in (2, 3, 4):
            tensors[f"W3{k}"] = tensors["W31"]
        same = NetworkParams(tensors, params.config)
        q_a, _ = forward(same, obs, state)
        q_b, _ = forward(same, Observation(obs.xi[[3, 2, 1, 0]], obs.xi5, obs.visible_mask), state)
        np.testing.assert_allclose(q_a, q_b, rtol=1e-12, atol=1e-12)

    @number("5.4")
    def test_scalar_oracle(self):
        rng = np.random.default_rng(2)
        for k in range(100):
            use_lstm = k % 4 != 3
            share = k % 2 == 0
            params = random_params(rng, use_lstm=use_lstm, share_weights=share)
            obs = random_observation(rng, hidden_slots=k % 4)
            state = random_state(rng)
            q, new_state = forward(params, obs, state)
            q_ref, h_ref, c_ref = scalar_forward(params, obs, state)
            np.testing.assert_allclose(q, q_ref, rtol=0, atol=1e-10)
            if use_lstm:
                np.testing.assert_allclose(new_state.hidden, h_ref, rtol=0, atol=1e-10)
                np.testing.assert_allclose(new_state.cell, c_ref, rtol=0, atol=1e-10)
            else:
                self.assertIs(new_state, state)

    @number("5.5")
    def test_recurrence_matters(self):
        rng = np.random.default_rng(3)
        obs = random_observation(rng)
        lstm = random_params(rng)
        first, second = forward_sequence(lstm, [obs, obs])
        self.assertGreater(np.max(np.abs(first - second)), 1e-6)
        dqn = random_params(rng, use_lstm=False)
        first, second = forward_sequence(dqn, [obs, obs])
        np.testing.assert_array_equal(first, second)


class TestLstmStep(unittest.TestCase):

    @number("5.6")
    def test_zero_weights(self):
        params = NetworkParams.zeros(SMALL_NETWORK)
        hidden, state = lstm_step(params, np.ones(SMALL_NETWORK.combine), RecurrentState.zeros(SMALL_NETWORK.lstm))
        np.testing.assert_array_equal(hidden, 0.0)
        np.testing.assert_array_equal(state.cell, 0.0)

    @number("5.7")
    def test_forget_gate_carries_cell(self):
        L = SMALL_NETWORK.lstm
        params = NetworkParams.zeros(SMALL_NETWORK)
        params["b_lstm"][:L] = -20.0
        params["b_lstm"][L:2 * L] = 20.0
        previous = RecurrentState(np.zeros(L), np.full(L, 0.7))
        hidden, state = lstm_step(params, np.zeros(SMALL_NETWORK.combine), previous)
        np.testing.assert_allclose(state.cell, 0.7, rtol=1e-8)
        np.testing.assert_allclose(hidden, 0.5 * np.tanh(0.7), rtol=1e-8)
        self.assertIs(state.hidden, hidden)

    @number("5.8")
    def test_dimension_errors(self):
        params = NetworkParams.zeros(SMALL_NETWORK)
        good = RecurrentState.zeros(SMALL_NETWORK.lstm)
        self.assertRaises(StructuralError, lambda: lstm_step(params, np.zeros(3), good))
        self.assertRaises(StructuralError, lambda: lstm_step(params, np.zeros(SMALL_NETWORK.combine), RecurrentState.zeros(2)))
        dqn = NetworkParams.zeros(SMALL_NETWORK, use_lstm=False)
        self.assertRaises(StructuralError, lambda: lstm_step(dqn, np.zeros(SMALL_NETWORK.combine), good))

    @number("5.9")
    def test_init(self):
        params = init_params(SMALL_NETWORK, np.random.default_rng(0))
        L = SMALL_NETWORK.lstm
        np.testing.assert_array_equal(params["b_lstm"][L:2 * L], 1.0)
        np.testing.assert_array_equal(params["b_lstm"][:L], 0.0)
        np.testing.assert_array_equal(params["b4"], 0.0)
        limit = math.sqrt(6.0 / (8 + SMALL_NETWORK.vehicle_hidden))
        self.assertLessEqual(np.max(np.abs(params["W1"])), limit)
        again = init_params(SMALL_NETWORK, np.random.default_rng(0))
        for name in params.names():
            np.testing.assert_array_equal(params[name], again[name])


class TestGradients(unittest.TestCase):

    def check_gradients(self, params, steps, burn_in, rstate=None, mask=None):
        _, grads = backward(params, steps, burn_in, rstate, mask)
        loss = lambda: backward(params, steps, burn_in, rstate, mask)[0]
        for name in params.names():
            numeric = central_difference(loss, params.tensors[name])
            error = relative_error(grads[name], numeric, floor=1e-5)
            self.assertLess(error, GRAD_TOLERANCE, f"{name}: relative error {error}")

    @number("5.10")
    def test_zero_residual(self):
        rng = np.random.default_rng(4)
        params = random_params(rng)
        obs = random_observation(rng)
        q, _ = forward(params, obs, RecurrentState.zeros(SMALL_NETWORK.lstm))
        loss, grads = backward(params, [(obs, 2, float(q[2]))], burn_in=0)
        self.assertEqual(loss, 0.0)
        for g in grads.values():
            np.testing.assert_array_equal(g, 0.0)

    @number("5.11")
    def test_output_layer_formula(self):
        rng = np.random.default_rng(5)
        params = random_params(rng)
        obs = random_observation(rng)
        q, state = forward(params, obs, RecurrentState.zeros(SMALL_NETWORK.lstm))
        loss, grads = backward(params, [(obs, 4, 0.3)], burn_in=0)
        residual = q[4] - 0.3
        self.assertAlmostEqual(loss, residual ** 2)
        expected = np.zeros_like(params["W_Q"])
        expected[4] = 2.0 * residual * state.hidden
        np.testing.assert_allclose(grads["W_Q"], expected, atol=1e-12)
        self.assertAlmostEqual(grads["b4"][4], 2.0 * residual)
        self.assertEqual(np.count_nonzero(grads["b4"]), 1)

    @number("5.12")
    def test_bptt_against_finite_differences(self):
        """Sequences of four with three burn-in steps, random start states and dropout masks."""
        for seed in range(10):
            rng = np.random.default_rng(100 + seed)
            params = random_params(rng)
            mask = sample_dropout_mask(SMALL_NETWORK, rng) if seed % 2 else None
            steps = random_steps(rng, 4, burn_in=3)
            self.check_gradients(params, steps, 3, random_state(rng), mask)

    @number("5.13")
    def test_other_shapes_against_finite_differences(self):
        rng = np.random.default_rng(7)
        # single step
        self.check_gradients(random_params(rng), random_steps(rng, 1, 0), 0)
        # every step trained
        self.check_gradients(random_params(rng), random_steps(rng, 3, 0), 0, random_state(rng))
        # DQN ablation
        self.check_gradients(random_params(rng, use_lstm=False), random_steps(rng, 1, 0), 0)
        # separate vehicle weights, with dropout
        mask = sample_dropout_mask(SMALL_NETWORK, rng)
        self.check_gradients(random_params(rng, share_weights=False), random_steps(rng, 2, 1), 1, None, mask)

    @number("5.14")
    def test_shared_gradient_sums_slots(self):
        rng = np.random.default_rng(9)
        shared = random_params(rng)
        tensors = {k: v.copy() for k, v in shared.tensors.items() if k not in ("W1", "b1", "W2", "b2")}
        for slot in range(1, 5):
            for name in ("W1", "b1", "W2", "b2"):
                tensors[f"{name}_{slot}"] = shared[name].copy()
        unshared = NetworkParams(tensors, SMALL_NETWORK, share_weights=False)
        steps = random_steps(rng, 3, 1)
        loss_a, grads_a = backward(shared, steps, 1)
        loss_b, grads_b = backward(unshared, steps, 1)
        self.assertAlmostEqual(loss_a, loss_b, places=12)
        for name in ("W1", "b1", "W2", "b2"):
            total = sum(grads_b[f"{name}_{slot}"] for slot in range(1, 5))
            np.testing.assert_allclose(grads_a[name], total, rtol=1e-10, atol=1e-12)

    @number("5.15")
    def test_backward_errors(self):
        rng = np.random.default_rng(10)
        params = random_params(rng)
        steps = random_steps(rng, 2, 1)
        self.assertRaises(StructuralError, lambda: backward(params, steps, 2))
        self.assertRaises(StructuralError, lambda: backward(params, [], 0))
        self.assertRaises(StructuralError, lambda: backward(params, steps, 0))
        obs = random_observation(rng)
        self.assertRaises(StructuralError, lambda: backward(params, [(obs, 6, 0.0)], 0))


class TestDropout(unittest.TestCase):

    @number("5.16")
    def test_mask_expectation(self):
        rng = np.random.default_rng(11)
        total = np.zeros(SMALL_NETWORK.combine)
        zeros = 0
        n = 40000
        for _ in range(n):
            mask = sample_dropout_mask(SMALL_NETWORK, rng)
            total += mask.combine
            zeros += int(np.count_nonzero(mask.vehicle_hidden == 0.0))
        np.testing.assert_allclose(total / n, 1.0, atol=0.02)
        self.assertAlmostEqual(zeros / (n * 4 * SMALL_NETWORK.vehicle_hidden), 0.2, delta=0.02)
        self.assertTrue(set(np.unique(mask.ego).tolist()) <= {0.0, 1.25})

    @number("5.17")
    def test_keep_all(self):
        rng = np.random.default_rng(12)
        params = random_params(rng)
        obs = random_observation(rng)
        state = random_state(rng)
        mask = sample_dropout_mask(SMALL_NETWORK, rng, keep_prob=1.0)
        np.testing.assert_array_equal(forward(params, obs, state, mask)[0], forward(params, obs, state)[0])


class TestParams(unittest.TestCase):

    @number("5.18")
    def test_structural_errors(self):
        params = NetworkParams.zeros(SMALL_NETWORK)
        tensors = dict(params.tensors)
        del tensors["b3"]
        self.assertRaises(StructuralError, lambda: NetworkParams(tensors, SMALL_NETWORK))
        tensors["b3"] = np.zeros(SMALL_NETWORK.combine + 1)
        self.assertRaises(StructuralError, lambda: NetworkParams(tensors, SMALL_NETWORK))
        obs = random_observation(np.random.default_rng(0))
        self.assertRaises(StructuralError, lambda: forward(params, obs, RecurrentState.zeros(3)))
        bad_obs = Observation(np.zeros((3, 8)), obs.xi5, obs.visible_mask)
        self.assertRaises(StructuralError, lambda: forward(params, bad_obs, RecurrentState.zeros(SMALL_NETWORK.lstm)))

    @number("5.19")
    def test_copy_is_deep(self):
        params = init_params(SMALL_NETWORK, np.random.default_rng(1))
        clone = params.copy()
        clone["W1"][0, 0] += 1.0
        self.assertNotEqual(clone["W1"][0, 0], params["W1"][0, 0])
        self.assertEqual(clone.names(), params.names())


class TestOptimizer(unittest.TestCase):

    def setUp(self):
        self.config = replace(SMALL_NETWORK, learning_rate=0.01, rms_decay=0.9, rms_epsilon=1e-8, grad_clip=10.0)
        self.params = NetworkParams.zeros(self.config)

    @number("5.20")
    def test_one_step(self):
        state = OptimizerState.create(self.params)
        grads = self.params.zeros_like()
        grads["b4"][0] = 0.5
        new_params, new_state = apply_gradients(self.params, grads, state)
        self.assertAlmostEqual(new_params["b4"][0], -0.01 * 0.5 / (math.sqrt(0.1 * 0.25) + 1e-8))
        self.assertAlmostEqual(new_state.mean_square["b4"][0], 0.025)
        self.assertEqual(new_state.steps, 1)
        np.testing.assert_array_equal(new_params["W1"], 0.0)
        np.testing.assert_array_equal(self.params["b4"], 0.0)
        np.testing.assert_array_equal(state.mean_square["b4"], 0.0)

    @number("5.21")
    def test_clipping(self):
        grads = {"a": np.array([3.0, 0.0]), "b": np.array([[4.0]])}
        self.assertEqual(global_norm(grads), 5.0)
        clipped, norm = clip_gradients(grads, 1.0)
        self.assertEqual(norm, 5.0)
        np.testing.assert_allclose(clipped["a"], [0.6, 0.0])
        np.testing.assert_allclose(clipped["b"], [[0.8]])
        same, _ = clip_gradients(grads, 10.0)
        self.assertIs(same, grads)

    @number("5.22")
    def test_bad_gradients(self):
        state = OptimizerState.create(self.params)
        grads = self.params.zeros_like()
        grads["W_Q"][1, 1] = np.nan
        with self.assertRaises(TrainingError) as ctx:
            apply_gradients(self.params, grads, state)
        self.assertIn("W_Q", str(ctx.exception))
        grads = self.params.zeros_like()
        del grads["b4"]
        self.assertRaises(StructuralError, lambda: apply_gradients(self.params, grads, state))
        grads = self.params.zeros_like()
        grads["b4"] = np.zeros(2)
        self.assertRaises(StructuralError, lambda: apply_gradients(self.params, grads, state))

    @number("5.23")
    def test_sigmoid_is_stable(self):
        x = np.array([-800.0, 0.0, 800.0])
        np.testing.assert_allclose(sigmoid(x), [0.0, 0.5, 1.0])
