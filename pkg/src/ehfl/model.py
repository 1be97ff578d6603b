"""Parameter vectors, loss tasks and real/complex symbol packing.

Model weights live in plain float64 numpy arrays of even length ``2N``.
Packing maps the first half onto the real parts and the second half onto
the imaginary parts of ``N`` complex symbols.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

ParameterVector = np.ndarray
ComplexSymbolVector = np.ndarray


def as_parameter_vector(values) -> ParameterVector:
    """Validate and return ``values`` as a 1-D float64 array of even length."""
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"parameter vector must be 1-D, got shape {v.shape}")
    if v.size == 0 or v.size % 2:
        raise ValueError(f"parameter vector length must be even and positive, got {v.size}")
    if not np.all(np.isfinite(v)):
        raise ValueError("parameter vector contains non-finite entries")
    return v


def pack(v: ParameterVector) -> ComplexSymbolVector:
    """Group a length-2N real vector into N complex symbols."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.size % 2:
        raise ValueError(f"cannot pack vector of shape {v.shape}: length must be even")
    n = v.size // 2
    out = np.empty(n, dtype=np.complex128)
    out.real = v[:n]
    out.imag = v[n:]
    return out


def unpack(c: ComplexSymbolVector) -> ParameterVector:
    """Exact inverse of :func:`pack`."""
    c = np.asarray(c, dtype=np.complex128)
    if c.ndim != 1:
        raise ValueError(f"symbol vector must be 1-D, got shape {c.shape}")
    return np.concatenate([c.real, c.imag])


@dataclass
class DeviceData:
    features: np.ndarray
    labels: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.features)


@dataclass
class LossTask:
    """Base class: per-device datasets and the per-sample loss ``f(theta, u)``.

    Subclasses implement ``_loss`` and ``_grad`` on a batch of samples.
    """

    kind: str = field(init=False, default="")
    dim: int
    datasets: list

    def __post_init__(self):
        if self.dim <= 0 or self.dim % 2:
            raise ValueError(f"model dimension must be even and positive, got {self.dim}")
        if not self.datasets:
            raise ValueError("task needs at least one device")

    @property
    def num_devices(self) -> int:
        return len(self.datasets)

    @property
    def sizes(self) -> np.ndarray:
        return np.array([len(d) for d in self.datasets], dtype=np.int64)

    @property
    def total_samples(self) -> int:
        return int(self.sizes.sum())

    @property
    def data_ratios(self) -> np.ndarray:
        """Global ratios ``|B_m| / B``."""
        return self.sizes / self.total_samples

    def _check(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (self.dim,):
            raise ValueError(f"expected parameter vector of length {self.dim}, got shape {theta.shape}")
        return theta

    def _loss(self, theta, data: DeviceData, idx) -> float:
        raise NotImplementedError

    def _grad(self, theta, data: DeviceData, idx) -> np.ndarray:
        raise NotImplementedError

    def device_loss(self, m: int, theta) -> float:
        theta = self._check(theta)
        data = self.datasets[m]
        return self._loss(theta, data, slice(None))

    def device_gradient(self, m: int, theta, batch=None) -> np.ndarray:
        theta = self._check(theta)
        data = self.datasets[m]
        if len(data) == 0:
            raise ValueError(f"device {m} has an empty dataset")
        idx = slice(None) if batch is None else np.asarray(batch)
        if not isinstance(idx, slice) and idx.size == 0:
            raise ValueError("empty batch")
        return self._grad(theta, data, idx)

    def initial_parameters(self, rng: Optional[np.random.Generator] = None) -> np.ndarray:
        return np.zeros(self.dim)

    def accuracy(self, theta) -> Optional[float]:
        return None


def global_loss(task: LossTask, theta) -> float:
    """Data-size weighted sum of the device losses."""
    theta = task._check(theta)
    ratios = task.data_ratios
    return float(sum(r * task.device_loss(m, theta) for m, r in enumerate(ratios) if r > 0))


def full_gradient(task: LossTask, theta) -> np.ndarray:
    theta = task._check(theta)
    ratios = task.data_ratios
    g = np.zeros(task.dim)
    for m, r in enumerate(ratios):
        if r > 0:
            g += r * task.device_gradient(m, theta)
    return g


def sample_batch(task: LossTask, m: int, batch_size: int, rng: np.random.Generator) -> np.ndarray:
    """Indices of a uniformly random batch from device ``m`` (no replacement).

    A batch at least as large as the dataset is the full dataset.
    """
    n = len(task.datasets[m])
    if n == 0:
        raise ValueError(f"device {m} has an empty dataset")
    if batch_size <= 0:
        raise ValueError(f"batch size must be positive, got {batch_size}")
    if batch_size >= n:
        return np.arange(n)
    return rng.choice(n, size=batch_size, replace=False)


def stochastic_gradient(task: LossTask, m: int, theta, batch=None) -> np.ndarray:
    """Gradient of device ``m``'s loss on ``batch`` (indices; ``None`` = full)."""
    return task.device_gradient(m, theta, batch)


# --- quadratic -----------------------------------------------------------


@dataclass
class QuadraticTask(LossTask):
    """``f(theta, u) = 0.5 * ||theta - u||^2``.

    The device loss is ``0.5 ||theta - c_m||^2`` plus the sample spread
    around the device mean ``c_m``; ``L = mu = 1``.
    """

    def __post_init__(self):
        super().__post_init__()
        self.kind = "quadratic"

    @property
    def centers(self) -> np.ndarray:
        return np.array([d.features.mean(axis=0) for d in self.datasets])

    @property
    def smoothness(self) -> float:
        return 1.0

    @property
    def strong_convexity(self) -> float:
        return 1.0

    def _loss(self, theta, data, idx):
        u = data.features[idx]
        return float(0.5 * np.mean(np.sum((theta - u) ** 2, axis=1)))

    def _grad(self, theta, data, idx):
        return theta - data.features[idx].mean(axis=0)

    def optimum(self, ratios: Optional[Sequence[float]] = None) -> np.ndarray:
        """Minimiser of the ``ratios``-weighted device losses (default ``|B_m|/B``)."""
        w = self.data_ratios if ratios is None else np.asarray(ratios, dtype=np.float64)
        return (w / w.sum()) @ self.centers

    def optimal_loss(self) -> float:
        return global_loss(self, self.optimum())

    def dataset_bias(self) -> float:
        """``F* - sum_m p_m F_m*``; ``F_m*`` is attained at ``c_m``."""
        local = [self.device_loss(m, c) for m, c in enumerate(self.centers)]
        return self.optimal_loss() - float(self.data_ratios @ local)


def make_quadratic_task(
    num_devices: int,
    dim: int,
    samples_per_device=1,
    spread: float = 0.0,
    rng: Optional[np.random.Generator] = None,
    centers: Optional[np.ndarray] = None,
) -> QuadraticTask:
    """Device centres ~ N(0, I); samples scattered around them with ``spread``.

    Samples are re-centred so that each device mean equals its centre
    exactly.  With ``spread = 0`` every device loss is exactly
    ``0.5 ||theta - c_m||^2``.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    if centers is None:
        centers = rng.standard_normal((num_devices, dim))
    centers = np.asarray(centers, dtype=np.float64)
    if centers.shape != (num_devices, dim):
        raise ValueError(f"centers must have shape {(num_devices, dim)}, got {centers.shape}")
    sizes = np.broadcast_to(np.asarray(samples_per_device), (num_devices,))
    datasets = []
    for c, n in zip(centers, sizes):
        n = int(n)
        if n <= 0:
            raise ValueError("every device needs at least one sample")
        noise = spread * rng.standard_normal((n, dim))
        noise -= noise.mean(axis=0)
        datasets.append(DeviceData(c + noise))
    return QuadraticTask(dim=dim, datasets=datasets)


# --- logistic regression -------------------------------------------------


@dataclass
class LogisticTask(LossTask):
    """L2-regularised logistic regression, labels in {-1, +1}."""

    reg: float = 0.1
    test_set: Optional[DeviceData] = None

    def __post_init__(self):
        super().__post_init__()
        self.kind = "logistic"

    def _loss(self, theta, data, idx):
        margins = data.labels[idx] * (data.features[idx] @ theta)
        return float(np.mean(np.logaddexp(0.0, -margins)) + 0.5 * self.reg * theta @ theta)

    def _grad(self, theta, data, idx):
        x, y = data.features[idx], data.labels[idx]
        s = -y * _sigmoid(-y * (x @ theta))
        return x.T @ s / len(y) + self.reg * theta

    def accuracy(self, theta):
        data = self.test_set
        if data is None:
            return None
        return float(np.mean(np.sign(data.features @ theta) == data.labels))


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def make_logistic_task(
    num_devices: int,
    dim: int,
    samples_per_device: int = 100,
    reg: float = 0.1,
    rng: Optional[np.random.Generator] = None,
) -> LogisticTask:
    rng = np.random.default_rng(0) if rng is None else rng
    w_true = rng.standard_normal(dim)

    def draw(n):
        x = rng.standard_normal((n, dim))
        y = np.where(x @ w_true + 0.5 * rng.standard_normal(n) >= 0, 1.0, -1.0)
        return DeviceData(x, y)

    datasets = [draw(samples_per_device) for _ in range(num_devices)]
    return LogisticTask(dim=dim, datasets=datasets, reg=reg, test_set=draw(1000))


# --- one-hidden-layer dense network ---------------------------------------


def toy_blobs(num_samples: int = 4000, seed: int = 20230101):
    """Bundled toy set: four overlapping Gaussian blobs in the plane.

    Generated from a fixed seed so it is identical on every machine and
    independent of the experiment seed.
    """
    rng = np.random.default_rng(seed)
    means = np.array([[1.5, 1.5], [-1.5, 1.5], [-1.5, -1.5], [1.5, -1.5]])
    labels = rng.integers(0, 4, size=num_samples)
    x = means[labels] + 1.1 * rng.standard_normal((num_samples, 2))
    return x, labels


@dataclass
class DenseNetTask(LossTask):
    """Softmax classifier with one tanh hidden layer.

    Parameters are flattened as ``[W1, b1, W2, b2]`` plus one inert
    padding entry when that count is odd.
    """

    in_dim: int = 2
    hidden: int = 16
    classes: int = 4
    test_set: Optional[DeviceData] = None

    def __post_init__(self):
        super().__post_init__()
        self.kind = "small-dense-net"
        if self.dim != dense_dim(self.in_dim, self.hidden, self.classes):
            raise ValueError("dim does not match the layer sizes")

    def _unflatten(self, theta):
        d, h, k = self.in_dim, self.hidden, self.classes
        i = 0
        w1 = theta[i:i + d * h].reshape(d, h); i += d * h
        b1 = theta[i:i + h]; i += h
        w2 = theta[i:i + h * k].reshape(h, k); i += h * k
        b2 = theta[i:i + k]
        return w1, b1, w2, b2

    def _forward(self, theta, x):
        w1, b1, w2, b2 = self._unflatten(theta)
        a = np.tanh(x @ w1 + b1)
        z = a @ w2 + b2
        z = z - z.max(axis=1, keepdims=True)
        p = np.exp(z)
        p /= p.sum(axis=1, keepdims=True)
        return a, p

    def _loss(self, theta, data, idx):
        _, p = self._forward(theta, data.features[idx])
        y = data.labels[idx]
        return float(-np.mean(np.log(p[np.arange(len(y)), y] + 1e-300)))

    def _grad(self, theta, data, idx):
        x, y = data.features[idx], data.labels[idx]
        n = len(y)
        w1, b1, w2, b2 = self._unflatten(theta)
        a, p = self._forward(theta, x)
        dz = p.copy()
        dz[np.arange(n), y] -= 1.0
        dz /= n
        gw2 = a.T @ dz
        gb2 = dz.sum(axis=0)
        da = (dz @ w2.T) * (1.0 - a ** 2)
        gw1 = x.T @ da
        gb1 = da.sum(axis=0)
        g = np.zeros(self.dim)
        flat = np.concatenate([gw1.ravel(), gb1, gw2.ravel(), gb2])
        g[:flat.size] = flat
        return g

    def initial_parameters(self, rng=None):
        rng = np.random.default_rng(0) if rng is None else rng
        d, h, k = self.in_dim, self.hidden, self.classes
        theta = np.zeros(self.dim)
        theta[:d * h] = rng.standard_normal(d * h) / np.sqrt(d)
        off = d * h + h
        theta[off:off + h * k] = rng.standard_normal(h * k) / np.sqrt(h)
        return theta

    def accuracy(self, theta):
        data = self.test_set
        if data is None:
            return None
        _, p = self._forward(self._check(theta), data.features)
        return float(np.mean(p.argmax(axis=1) == data.labels))


def dense_dim(in_dim: int, hidden: int, classes: int) -> int:
    n = in_dim * hidden + hidden + hidden * classes + classes
    return n + (n % 2)


def make_dense_task(
    num_devices: int,
    samples_per_device: int = 75,
    hidden: int = 16,
    rng: Optional[np.random.Generator] = None,
) -> DenseNetTask:
    """Split the toy blobs i.i.d. and equally across devices; 1000 held out."""
    rng = np.random.default_rng(0) if rng is None else rng
    x, y = toy_blobs()
    n_train = num_devices * samples_per_device
    if n_train + 1000 > len(x):
        x, y = toy_blobs(n_train + 1000)
    order = rng.permutation(len(x))
    test = order[:1000]
    train = order[1000:1000 + n_train].reshape(num_devices, samples_per_device)
    datasets = [DeviceData(x[i], y[i]) for i in train]
    return DenseNetTask(
        dim=dense_dim(2, hidden, 4),
        datasets=datasets,
        hidden=hidden,
        test_set=DeviceData(x[test], y[test]),
    )
