"""Shared fixtures: a small deterministic multi-writer corpus."""

import numpy as np
import pytest

from inkpass.capture import Dataset, DigitSample, TouchPoint
from inkpass.evaluation import (
    build_digit_table,
    dtw_baseline_system,
    normalized_matrices,
)


def _style_stroke(rng, base_angles, base_steps, jitter):
    """One drawing: the writer's stroke shape plus per-repetition noise."""
    angles = base_angles + rng.normal(0.0, jitter, size=base_angles.size)
    steps = base_steps * np.exp(rng.normal(0.0, jitter, size=base_steps.size))
    xs = np.concatenate([[0.0], np.cumsum(steps * np.cos(angles))])
    ys = np.concatenate([[0.0], np.cumsum(steps * np.sin(angles))])
    return [(float(x), float(y)) for x, y in zip(xs, ys)]


def build_mini_corpus(n_users=5, dev_user_count=2, seed=1905):
    """Writers with stable per-digit shapes; sessions differ only by noise."""
    rng = np.random.default_rng(seed)
    samples = []
    for u in range(n_users):
        user = f"w{u:02d}"
        for digit in range(10):
            n = int(rng.integers(10, 16))
            base_angles = rng.uniform(-np.pi, np.pi, size=n - 1)
            base_steps = rng.uniform(1.0, 4.0, size=n - 1)
            for session in (1, 2):
                for rep in (1, 2, 3, 4):
                    coords = _style_stroke(rng, base_angles, base_steps, 0.05)
                    pts = tuple(
                        TouchPoint(x, y, 12.0 * i)
                        for i, (x, y) in enumerate(coords)
                    )
                    samples.append(DigitSample(user, digit, session, rep, pts))
    return Dataset(samples=tuple(samples), dev_user_count=dev_user_count)


@pytest.fixture(scope="session")
def mini_dataset():
    return build_mini_corpus()


@pytest.fixture(scope="session")
def mini_matrices(mini_dataset):
    return normalized_matrices(mini_dataset)


@pytest.fixture(scope="session")
def mini_tables(mini_dataset, mini_matrices):
    system = dtw_baseline_system()
    return {
        digit: build_digit_table(
            mini_dataset, system, digit, n_enrol=2, matrices=mini_matrices)
        for digit in range(10)
    }


# --- shared recurrent-scorer fixtures (also used by the acceptance gate) ---

def micro_config():
    from inkpass.rnn import NetworkConfig

    return NetworkConfig(input_dim=21, hidden1=2, hidden2=3)


def random_function_matrix(rng, length):
    from inkpass.features import FunctionMatrix

    return FunctionMatrix(values=rng.normal(size=(21, length)), normalized=True)


def constant_function_matrix(level, length):
    from inkpass.features import FunctionMatrix

    return FunctionMatrix(
        values=np.full((21, length), float(level)), normalized=True)


def finite_difference_worst_error(params, pairs, step=1e-4):
    """Central-difference gradient oracle; returns the worst relative error."""
    from inkpass.rnn import batch_loss_and_grads, loss_value

    _, grads = batch_loss_and_grads(params, pairs)
    worst = 0.0
    for key, tensor in params.tensors().items():
        analytic = grads[key]
        it = np.nditer(tensor, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            kept = tensor[idx]
            tensor[idx] = kept + step
            up = loss_value(params, pairs)
            tensor[idx] = kept - step
            down = loss_value(params, pairs)
            tensor[idx] = kept
            numeric = (up - down) / (2.0 * step)
            got = analytic[idx] if analytic.ndim else float(analytic)
            rel = abs(got - numeric) / max(abs(got) + abs(numeric), 1e-6)
            worst = max(worst, rel)
    return worst


@pytest.fixture(scope="session")
def gradcheck_worst_error():
    from inkpass.rnn import init_network

    rng = np.random.default_rng(7)
    params = init_network(3, micro_config())
    pairs = [
        (random_function_matrix(rng, 3), random_function_matrix(rng, 4), 1),
        (random_function_matrix(rng, 3), random_function_matrix(rng, 3), 0),
        (random_function_matrix(rng, 5), random_function_matrix(rng, 3), 1),
    ]
    return finite_difference_worst_error(params, pairs)


def toy_pair_set():
    """Separable toy task: constant sequences at level 0 versus level 1."""
    from inkpass.rnn import PairSet

    pairs = []
    for n in (3, 4, 5, 6):
        pairs.append((constant_function_matrix(0, n), constant_function_matrix(0, n + 1), 1))
        pairs.append((constant_function_matrix(1, n), constant_function_matrix(1, n + 1), 1))
        pairs.append((constant_function_matrix(0, n), constant_function_matrix(1, n + 1), 0))
        pairs.append((constant_function_matrix(1, n), constant_function_matrix(0, n + 1), 0))
    return PairSet(pairs=tuple(pairs))


@pytest.fixture(scope="session")
def toy_training_run():
    from inkpass.rnn import TrainConfig, init_network, train

    data = toy_pair_set()
    params = init_network(5, micro_config())
    trained, curve = train(
        params, data,
        TrainConfig(learning_rate=0.01, epochs=200, batch_size=16,
                    seed=0, holdout=0.0),
    )
    return {"data": data, "trained": trained, "curve": curve}
