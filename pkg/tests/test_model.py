import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from ehfl import model as mc


def quad_task(centers, sizes=1, spread=0.0, seed=0):
    centers = np.asarray(centers, dtype=float)
    return mc.make_quadratic_task(len(centers), centers.shape[1], sizes, spread,
                                  np.random.default_rng(seed), centers=centers)


class TestPacking:
    def test_reads_halves(self):
        c = mc.pack(np.array([1.0, 2.0, 3.0, 4.0]))
        np.testing.assert_array_equal(c.real, [1.0, 2.0])
        np.testing.assert_array_equal(c.imag, [3.0, 4.0])

    def test_zero(self):
        c = mc.pack(np.zeros(6))
        assert c.shape == (3,)
        assert np.all(c == 0)

    def test_round_trip_random(self):
        rng = np.random.default_rng(1)
        for _ in range(1000):
            n = int(rng.integers(1, 50))
            v = rng.standard_normal(2 * n) * 10.0 ** rng.integers(-200, 200)
            out = mc.unpack(mc.pack(v))
            assert out.tobytes() == v.tobytes()

    @given(arrays(np.float64, st.integers(1, 64).map(lambda n: 2 * n),
                  elements=st.floats(allow_nan=False, allow_infinity=False)))
    @settings(max_examples=200)
    def test_round_trip_property(self, v):
        assert mc.unpack(mc.pack(v)).tobytes() == v.tobytes()

    def test_odd_length_rejected(self):
        with pytest.raises(ValueError):
            mc.pack(np.ones(5))

    def test_parameter_vector_validation(self):
        with pytest.raises(ValueError):
            mc.as_parameter_vector([1.0, 2.0, 3.0])
        with pytest.raises(ValueError):
            mc.as_parameter_vector([1.0, np.nan])
        assert mc.as_parameter_vector([1, 2]).dtype == np.float64


class TestGlobalLoss:
    def test_minimum_equal_sizes(self):
        rng = np.random.default_rng(2)
        centers = rng.standard_normal((5, 4))
        task = quad_task(centers)
        cbar = centers.mean(axis=0)
        expected = 0.5 * np.mean(np.sum((centers - cbar) ** 2, axis=1))
        assert mc.global_loss(task, cbar) == pytest.approx(expected, rel=1e-14)

    def test_single_device_zero_at_center(self):
        c = np.array([[0.3, -1.2, 2.0, 0.5]])
        assert mc.global_loss(quad_task(c), c[0]) == 0.0

    def test_weighted_three_devices(self):
        centers = np.array([[0.0, 0.0], [2.0, 1.0], [-1.0, 4.0]])
        sizes = [1, 2, 1]
        task = quad_task(centers, sizes)
        # oracle: weighted mean and direct evaluation of the weighted sum
        w = np.array(sizes) / 4.0
        opt = w @ centers
        np.testing.assert_allclose(task.optimum(), opt, rtol=1e-15)
        direct = sum(wi * 0.5 * np.sum((opt - c) ** 2) for wi, c in zip(w, centers))
        assert mc.global_loss(task, opt) == pytest.approx(direct, rel=1e-14)
        # and it is the minimum on a dense grid around it
        g = np.linspace(-0.5, 0.5, 41)
        vals = [mc.global_loss(task, opt + np.array([a, b])) for a in g for b in g]
        assert min(vals) == pytest.approx(direct, rel=1e-14)

    def test_dimension_mismatch(self):
        task = quad_task(np.zeros((2, 4)))
        with pytest.raises(ValueError):
            mc.global_loss(task, np.zeros(6))


class TestGradient:
    def test_full_batch_quadratic(self):
        rng = np.random.default_rng(3)
        task = quad_task(rng.standard_normal((3, 6)), 20, spread=1.0)
        theta = rng.standard_normal(6)
        for m in range(3):
            np.testing.assert_allclose(mc.stochastic_gradient(task, m, theta),
                                       theta - task.centers[m], atol=1e-14)

    def test_stationary_at_center(self):
        task = quad_task(np.array([[1.0, 2.0], [3.0, 4.0]]), 10, spread=0.5)
        g = mc.stochastic_gradient(task, 1, task.centers[1])
        np.testing.assert_allclose(g, 0.0, atol=1e-14)

    def test_minibatch_unbiased(self):
        rng = np.random.default_rng(4)
        task = quad_task(rng.standard_normal((2, 20)), 200, spread=1.0)
        theta = task.centers[0] + 3.0
        full = mc.stochastic_gradient(task, 0, theta)
        total = np.zeros(20)
        n = 10_000
        for _ in range(n):
            idx = mc.sample_batch(task, 0, 10, rng)
            total += mc.stochastic_gradient(task, 0, theta, idx)
        rel = np.linalg.norm(total / n - full) / np.linalg.norm(full)
        assert rel < 0.02

    def test_monte_carlo_rate(self):
        # error of the averaged estimator shrinks roughly like 1/sqrt(samples)
        rng = np.random.default_rng(5)
        task = quad_task(rng.standard_normal((1, 8)), 100, spread=2.0)
        theta = np.zeros(8)
        full = mc.stochastic_gradient(task, 0, theta)

        def err(n, reps=40):
            e = []
            for _ in range(reps):
                g = np.mean([mc.stochastic_gradient(task, 0, theta, mc.sample_batch(task, 0, 5, rng))
                             for _ in range(n)], axis=0)
                e.append(np.sum((g - full) ** 2))
            return np.sqrt(np.mean(e))

        ratio = err(100) / err(1600)
        assert 2.5 < ratio < 6.0  # sqrt(16) = 4

    @pytest.mark.parametrize("kind", ["quadratic", "logistic", "dense"])
    def test_finite_differences(self, kind):
        rng = np.random.default_rng(6)
        if kind == "quadratic":
            task = quad_task(rng.standard_normal((2, 6)), 30, spread=1.0)
        elif kind == "logistic":
            task = mc.make_logistic_task(2, 6, 50, rng=rng)
        else:
            task = mc.make_dense_task(2, 40, hidden=5, rng=rng)
        theta = task.initial_parameters(rng) + 0.1 * rng.standard_normal(task.dim)
        g = mc.stochastic_gradient(task, 1, theta)
        h = 1e-6
        fd = np.array([
            (task.device_loss(1, theta + h * e) - task.device_loss(1, theta - h * e)) / (2 * h)
            for e in np.eye(task.dim)
        ])
        assert np.linalg.norm(fd - g) <= 1e-6 * max(np.linalg.norm(g), 1.0)

    def test_quadratic_smooth_strongly_convex(self):
        rng = np.random.default_rng(7)
        task = quad_task(rng.standard_normal((3, 4)), 5, spread=1.0)
        assert task.smoothness == task.strong_convexity == 1.0
        for _ in range(50):
            a, b = rng.standard_normal((2, 4))
            gap = mc.global_loss(task, a) - mc.global_loss(task, b) - (a - b) @ mc.full_gradient(task, b)
            assert gap == pytest.approx(0.5 * np.sum((a - b) ** 2), rel=1e-9)

    def test_empty_dataset(self):
        task = mc.QuadraticTask(dim=2, datasets=[mc.DeviceData(np.zeros((0, 2)))])
        with pytest.raises(ValueError):
            mc.stochastic_gradient(task, 0, np.zeros(2))

    def test_batch_sampler(self):
        task = quad_task(np.zeros((1, 2)), 10)
        rng = np.random.default_rng(0)
        idx = mc.sample_batch(task, 0, 4, rng)
        assert len(set(idx)) == 4 and idx.max() < 10
        np.testing.assert_array_equal(mc.sample_batch(task, 0, 128, rng), np.arange(10))


def test_dataset_bias_nonnegative():
    rng = np.random.default_rng(8)
    task = quad_task(rng.standard_normal((4, 6)), [3, 5, 7, 9], spread=0.7)
    assert task.dataset_bias() >= 0
    assert sum(task.sizes) == task.total_samples


def test_dense_task_shapes():
    task = mc.make_dense_task(4, 50)
    assert task.dim % 2 == 0
    assert task.num_devices == 4
    acc = task.accuracy(task.initial_parameters())
    assert 0.0 <= acc <= 1.0
