"""Grid-based Bayesian estimation of (theta, phi) and Monte-Carlo MSE matrices."""

import math
from dataclasses import dataclass, replace

import numpy as np

from .measurement import Povm, born_probabilities, probability_table, sample_outcomes, stream_seed
from .models import StatisticalModel, as_point

DEFAULT_GRID = 201
DEFAULT_RANGE = (0.0, math.pi / 2)
_LOG_FLOOR = 1e-300
_CHUNK = 128


class PosteriorUnderflowError(FloatingPointError):
    pass


@dataclass(frozen=True)
class GridSpec:
    n_theta: int = DEFAULT_GRID
    n_phi: int = DEFAULT_GRID
    theta_range: tuple[float, float] = DEFAULT_RANGE
    phi_range: tuple[float, float] = DEFAULT_RANGE

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        return _cell_centres(self.theta_range, self.n_theta), _cell_centres(self.phi_range, self.n_phi)


def _cell_centres(bounds, n) -> np.ndarray:
    lo, hi = bounds
    if n < 1 or not hi > lo:
        raise ValueError(f"invalid grid axis {bounds} with {n} nodes")
    return lo + (np.arange(n) + 0.5) * (hi - lo) / n


@dataclass(frozen=True)
class PosteriorGrid:
    theta_axis: np.ndarray
    phi_axis: np.ndarray
    log_weights: np.ndarray

    def weights(self) -> np.ndarray:
        top = np.max(self.log_weights)
        if not np.isfinite(top):
            raise PosteriorUnderflowError("posterior vanished on the whole grid")
        w = np.exp(self.log_weights - top)
        total = w.sum()
        if not total > 0 or not np.isfinite(total):
            raise PosteriorUnderflowError("posterior vanished on the whole grid")
        return w / total

    def normalized(self) -> "PosteriorGrid":
        return replace(self, log_weights=np.log(np.maximum(self.weights(), _LOG_FLOOR)))


def uniform_prior(grid: GridSpec = GridSpec()) -> PosteriorGrid:
    thetas, phis = grid.axes()
    lw = np.full((len(thetas), len(phis)), -math.log(len(thetas) * len(phis)))
    return PosteriorGrid(thetas, phis, lw)


_TABLE_CACHE: dict = {}


def log_likelihood_table(model: StatisticalModel, povm: Povm, thetas, phis) -> np.ndarray:
    """log p(k | node) with shape (n_outcomes, n_theta, n_phi); cached per model/POVM/grid."""
    thetas, phis = np.asarray(thetas, dtype=float), np.asarray(phis, dtype=float)
    key = (model.kind, povm.label, povm.names, thetas.tobytes(), phis.tobytes())
    table = _TABLE_CACHE.get(key)
    if table is None:
        if len(_TABLE_CACHE) >= 32:
            _TABLE_CACHE.clear()
        table = np.log(np.maximum(probability_table(model, povm, thetas, phis), _LOG_FLOOR))
        table.setflags(write=False)
        _TABLE_CACHE[key] = table
    return table


def posterior_update(prior: PosteriorGrid, model: StatisticalModel, povm: Povm, counts) -> PosteriorGrid:
    counts = np.asarray(counts)
    if counts.shape != (len(povm),):
        raise ValueError(f"expected {len(povm)} outcome counts, got shape {counts.shape}")
    if np.any(counts < 0):
        raise ValueError("counts must be nonnegative")
    table = log_likelihood_table(model, povm, prior.theta_axis, prior.phi_axis)
    lw = prior.log_weights + np.tensordot(counts.astype(float), table, axes=1)
    post = PosteriorGrid(prior.theta_axis, prior.phi_axis, lw)
    return post.normalized()


def posterior_moments(post: PosteriorGrid) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean (theta, phi) and 2x2 covariance."""
    w = post.weights()
    wt, wp = w.sum(axis=1), w.sum(axis=0)
    mean = np.array([wt @ post.theta_axis, wp @ post.phi_axis])
    dt, dp = post.theta_axis - mean[0], post.phi_axis - mean[1]
    cov = np.empty((2, 2))
    cov[0, 0] = wt @ dt**2
    cov[1, 1] = wp @ dp**2
    cov[0, 1] = cov[1, 0] = dt @ w @ dp
    return mean, cov


@dataclass(frozen=True)
class MseMatrix:
    v: np.ndarray
    n_trials: int
    m: int
    n_probes: int
    errors: np.ndarray  # (n_trials, 2) estimate - truth

    def weighted_values(self, w) -> np.ndarray:
        """Per-trial e^T W e."""
        return np.einsum("ti,ij,tj->t", self.errors, np.asarray(w), self.errors)

    def standard_error(self, w) -> float:
        """Standard error of Tr(W V) estimated from the per-trial spread."""
        vals = self.weighted_values(w)
        if len(vals) < 2:
            return math.nan
        return float(np.std(vals, ddof=1) / math.sqrt(len(vals)))


def weighted_mse(v, w) -> float:
    v = v.v if isinstance(v, MseMatrix) else np.asarray(v)
    return float(np.trace(np.asarray(w) @ v))


def probes_for(model: StatisticalModel, m: int) -> int:
    """Qubit budget m buys m / (qubits per probe) probes."""
    if m % model.n_qubits:
        raise ValueError(f"m={m} is not a multiple of {model.n_qubits} qubits per probe")
    return m // model.n_qubits


def _estimates(counts, table, thetas, phis, estimator):
    k = table.shape[0]
    flat = table.reshape(k, -1)
    out = np.empty((counts.shape[0], 2))
    n_phi = len(phis)
    for start in range(0, counts.shape[0], _CHUNK):
        lw = counts[start:start + _CHUNK].astype(float) @ flat
        lw -= lw.max(axis=1, keepdims=True)
        w = np.exp(lw)
        if estimator == "map":
            idx = np.argmax(w, axis=1)
            out[start:start + _CHUNK, 0] = thetas[idx // n_phi]
            out[start:start + _CHUNK, 1] = phis[idx % n_phi]
            continue
        w /= w.sum(axis=1, keepdims=True)
        w = w.reshape(-1, len(thetas), n_phi)
        out[start:start + _CHUNK, 0] = w.sum(axis=2) @ thetas
        out[start:start + _CHUNK, 1] = w.sum(axis=1) @ phis
    return out


def run_trials(
    model: StatisticalModel,
    povm: Povm,
    lam_true,
    m: int,
    n_trials: int,
    master_seed: int,
    grid: GridSpec = GridSpec(),
    point_index: int = 0,
    estimator: str = "mean",
) -> MseMatrix:
    """Repeat sample -> Bayesian update from a uniform prior -> estimate, ``n_trials`` times.

    Trial ``t`` draws from the stream keyed by ``(point_index, t)`` so results
    do not depend on evaluation order.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be positive")
    if estimator not in ("mean", "map"):
        raise ValueError(f"unknown estimator {estimator!r}")
    lam = as_point(lam_true)
    n_probes = probes_for(model, m)
    probs = born_probabilities(model.state(lam), povm)
    counts = np.array(
        [sample_outcomes(probs, n_probes, stream_seed(master_seed, point_index, t)).counts for t in range(n_trials)]
    )
    thetas, phis = grid.axes()
    table = log_likelihood_table(model, povm, thetas, phis)
    est = _estimates(counts, table, thetas, phis, estimator)
    errors = est - lam.as_array()
    v = np.empty((2, 2))
    for i in range(2):
        for j in range(2):
            v[i, j] = math.fsum(errors[:, i] * errors[:, j]) / n_trials
    return MseMatrix(v, n_trials, m, n_probes, errors)
