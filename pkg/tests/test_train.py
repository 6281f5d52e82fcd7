import math

import mpmath
import numpy as np
import pytest

from idu import data, train
from idu.circuits import build_dru, build_idu
from idu.train import AdamState, TrainConfig, TrainingError

from oracles import assert_grad_close, central_difference


def synthetic_split(n=96, seed=0):
    rng = np.random.default_rng(seed)
    angles = rng.uniform(0, np.pi, (n, 10, 10))
    labels = rng.integers(0, 10, n)
    return data.make_split(angles, labels, seed, (n * 48 // 70, n * 12 // 70, n * 10 // 70))


# ---- softmax / forward ----------------------------------------------------------


def test_softmax_uniform():
    np.testing.assert_allclose(train.softmax(np.full(10, 0.3)), 0.1, atol=1e-15)


def test_softmax_argmax():
    z = -np.ones(10)
    z[0] = 1
    assert train.softmax(z).argmax() == 0


def test_softmax_matches_high_precision():
    rng = np.random.default_rng(0)
    mpmath.mp.dps = 40
    for _ in range(20):
        z = rng.uniform(-1, 1, 10)
        e = [mpmath.exp(mpmath.mpf(float(v))) for v in z]
        total = mpmath.fsum(e)
        ref = np.array([float(v / total) for v in e])
        np.testing.assert_allclose(train.softmax(z), ref, rtol=0, atol=1e-12)


def test_softmax_large_inputs():
    p = train.softmax(np.array([1000.0, 999.0, -1000.0]))
    assert np.isfinite(p).all() and abs(p.sum() - 1) < 1e-12


def test_forward_normalized():
    rng = np.random.default_rng(1)
    c = build_idu(4)
    probs = train.forward(c, rng.uniform(0, np.pi, (8, 100)), rng.uniform(0, np.pi, 200))
    assert probs.shape == (8, 10)
    np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-12)
    assert train.forward(c, np.zeros(100), np.zeros(200)).shape == (10,)


# ---- loss ---------------------------------------------------------------------


def test_loss_uniform():
    assert train.loss(np.full(10, 0.1), 4) == pytest.approx(math.log(10), abs=1e-12)


def test_loss_certain():
    p = np.zeros(10)
    p[2] = 1
    assert train.loss(p, 2) == 0.0


def test_loss_floor():
    assert train.loss(np.eye(10)[0], 5) == pytest.approx(-math.log(1e-30))


def test_loss_batch():
    p = np.array([[0.5, 0.5], [0.25, 0.75]])
    np.testing.assert_allclose(train.loss(p, [0, 1]), [math.log(2), -math.log(0.75)])


@pytest.mark.parametrize("circuit", [build_idu(1), build_idu(10, "rxcrzry"), build_dru("rxry")],
                         ids=["idu1", "idu10-rxcrzry", "dru-rxry"])
def test_loss_gradient_finite_differences(circuit):
    rng = np.random.default_rng(2)
    for _ in range(4):
        x, th = rng.uniform(0, np.pi, 100), rng.uniform(0, np.pi, 200)
        y = int(rng.integers(10))
        _, _, g = train.per_sample_loss_grad(circuit, x[None, :], [y], th)
        idx = rng.choice(200, 10, replace=False)

        def f(sub):
            t = th.copy()
            t[idx] = sub
            return train.loss(train.forward(circuit, x, t), y)

        assert_grad_close(g[0, idx], central_difference(f, th[idx]))


def test_batch_grad_is_mean_of_samples():
    rng = np.random.default_rng(3)
    c = build_idu(2)
    x, y = rng.uniform(0, np.pi, (6, 100)), rng.integers(0, 10, 6)
    th = rng.uniform(0, np.pi, 200)
    mean_loss, correct, g = train.batch_loss_grad(c, x, y, th)
    losses, probs, grads = train.per_sample_loss_grad(c, x, y, th)
    assert mean_loss == pytest.approx(losses.mean())
    assert correct == int((probs.argmax(1) == y).sum())
    np.testing.assert_allclose(g, grads.mean(axis=0), atol=1e-15)


def test_threaded_batch_is_identical():
    rng = np.random.default_rng(4)
    c = build_idu(4)
    x, y = rng.uniform(0, np.pi, (32, 100)), rng.integers(0, 10, 32)
    th = rng.uniform(0, np.pi, 200)
    a = train.batch_loss_grad(c, x, y, th, threads=1)
    b = train.batch_loss_grad(c, x, y, th, threads=4)
    assert a[0] == b[0] and a[1] == b[1]
    assert a[2].tobytes() == b[2].tobytes()


# ---- ADAM ---------------------------------------------------------------------


def test_adam_zero_gradient():
    state = AdamState.zeros(3)
    p = np.array([0.1, 0.2, 0.3])
    new, state = train.adam_step(state, p, np.zeros(3))
    np.testing.assert_array_equal(new, p)
    assert state.t == 1


def test_adam_bounded_step():
    state = AdamState.zeros(2, learning_rate=0.01)
    p = np.zeros(2)
    g = np.array([3.0, -0.002])
    for _ in range(200):
        prev = p
        p, state = train.adam_step(state, p, g)
    step = p - prev
    np.testing.assert_allclose(step, -0.01 * np.sign(g), rtol=0.01)


def test_adam_matches_scripted_trace():
    # minimise 0.5 * (a * x^2 + b * y^2); recurrence written out by hand
    a, b, lr, b1, b2, eps = 3.0, 0.5, 0.1, 0.9, 0.999, 1e-7
    p = np.array([1.0, -2.0])
    state = AdamState.zeros(2, learning_rate=lr)
    x, y = 1.0, -2.0
    mx = my = vx = vy = 0.0
    for t in range(1, 4):
        gx, gy = a * x, b * y
        mx = b1 * mx + (1 - b1) * gx
        my = b1 * my + (1 - b1) * gy
        vx = b2 * vx + (1 - b2) * gx * gx
        vy = b2 * vy + (1 - b2) * gy * gy
        x -= lr * (mx / (1 - b1**t)) / (math.sqrt(vx / (1 - b2**t)) + eps)
        y -= lr * (my / (1 - b1**t)) / (math.sqrt(vy / (1 - b2**t)) + eps)
        p, state = train.adam_step(state, p, np.array([a, b]) * p)
        assert abs(p[0] - x) < 1e-12 and abs(p[1] - y) < 1e-12
    assert (state.v >= 0).all()


@pytest.mark.parametrize("bad", [np.nan, np.inf, -np.inf])
def test_adam_rejects_non_finite(bad):
    with pytest.raises(TrainingError, match="components \\[1\\]"):
        train.adam_step(AdamState.zeros(3), np.zeros(3), np.array([0.0, bad, 1.0]))


def test_adam_shape_mismatch():
    with pytest.raises(ValueError):
        train.adam_step(AdamState.zeros(3), np.zeros(3), np.zeros(2))


# ---- configuration and runs -----------------------------------------------------


@pytest.mark.parametrize("kw", [{"learning_rate": 0}, {"epochs": 0}, {"batch_size": 0}, {"seeds": ()}])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        TrainConfig(**kw)


def test_train_run_deterministic():
    split = synthetic_split()
    c = build_idu(10)
    cfg = TrainConfig(epochs=2, batch_size=16, seeds=(7,))
    a = train.run_experiment(c, split, cfg)
    b = train.run_experiment(c, split, cfg)
    assert train.format_run_metrics(a.runs[0]) == train.format_run_metrics(b.runs[0])
    assert train.format_aggregate(a) == train.format_aggregate(b)
    assert train.format_summary(a) == train.format_summary(b)
    run = a.runs[0]
    assert len(run.epochs) == 2
    for e in run.epochs:
        assert 0 <= e.train_acc <= 1 and 0 <= e.val_acc <= 1 and e.train_loss > 0
    assert 0 <= run.test_acc <= 1


def test_training_reduces_loss():
    # a single fixed batch: ADAM must decrease the loss on it
    rng = np.random.default_rng(5)
    c = build_idu(10)
    x, y = rng.uniform(0, np.pi, (16, 100)), rng.integers(0, 10, 16)
    th = rng.uniform(0, np.pi, 200)
    state = AdamState.zeros(200, learning_rate=0.01)
    first, _, g = train.batch_loss_grad(c, x, y, th)
    for _ in range(30):
        th, state = train.adam_step(state, th, g)
        last, _, g = train.batch_loss_grad(c, x, y, th)
    assert last < first - 0.05


def test_formats():
    split = synthetic_split()
    cfg = TrainConfig(epochs=1, batch_size=32, seeds=(0, 1))
    res = train.run_experiment(build_idu(2), split, cfg)
    lines = train.format_run_metrics(res.runs[0]).splitlines()
    assert lines[0] == "epoch trainloss trainacc valacc"
    assert len(lines) == 2 and len(lines[1].split()) == 4
    agg = train.format_aggregate(res).splitlines()
    assert agg[0] == "epoch vamean vastd"
    mean = float(agg[1].split()[1])
    assert mean == pytest.approx(100 * res.val_curves[:, 0].mean(), abs=1e-5)
    summary = train.format_summary(res)
    assert summary.startswith("seed testacc\n0 ")
    assert "IDU_2 test accuracy" in summary
