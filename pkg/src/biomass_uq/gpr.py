"""Exact Gaussian process regression of biomass on tree height.

The prior is a zero-mean process with a unit-amplitude one-dimensional RBF
kernel, shifted by a constant mean offset ``b0``.  Observations carry
homoscedastic Gaussian noise ``sigma`` (a fixed setting, not fitted).  The
length scale and the offset are chosen by minimising the loss

    L(l, b0) = (y - b0)^T (K + sigma^2 I)^{-1} (y - b0) + log det(K + sigma^2 I),

i.e. twice the negative log marginal likelihood without its constant.  The
offset has a closed-form optimum for every ``l`` (a generalised mean), so
the search is one-dimensional: a log-spaced grid followed by a step-halving
local refinement.  Everything is solved densely, O(n^3) in the number of
training trees.

By default both height and biomass enter in natural-log space and the
predicted biomass is ``exp`` of the log-space mean, with no lognormal
variance correction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg

from .errors import (
    DegenerateData,
    EmptyTraining,
    FactorizationFailure,
    InputError,
    MissingField,
    NonpositiveInput,
    NonpositiveLengthScale,
    SearchRangeInvalid,
)

__all__ = [
    "TransformSpec",
    "GprHyperparams",
    "SearchConfig",
    "FitInfo",
    "GprModel",
    "GprPrediction",
    "rbf_kernel",
    "build_gram",
    "nll",
    "nll_eigen",
    "nll_grad",
    "optimal_mean_offset",
    "fit_gpr",
    "predict_gpr",
]

DEFAULT_SIGMA = 0.5
DEFAULT_JITTER = 1e-8
MAX_JITTER = 1e-2
_PREDICT_CHUNK = 1024


@dataclass(frozen=True)
class TransformSpec:
    """Per-axis transform: ``"log"`` (natural log) or ``"raw"``."""

    height: str = "log"
    biomass: str = "log"

    def __post_init__(self):
        for axis in (self.height, self.biomass):
            if axis not in ("log", "raw"):
                raise ValueError(f"transform mode must be 'log' or 'raw', got {axis!r}")

    @classmethod
    def raw(cls):
        return cls("raw", "raw")

    @staticmethod
    def _fwd(mode, v, what):
        v = np.asarray(v, dtype=float)
        if mode == "raw":
            return v
        if np.any(~(v > 0)):
            raise NonpositiveInput(f"log transform requires {what} > 0")
        return np.log(v)

    def forward_x(self, x):
        return self._fwd(self.height, x, "heights")

    def forward_y(self, y):
        return self._fwd(self.biomass, y, "biomass")

    def inverse_y(self, z):
        z = np.asarray(z, dtype=float)
        return np.exp(z) if self.biomass == "log" else z


@dataclass(frozen=True)
class GprHyperparams:
    length_scale: float
    mean_offset: float
    noise_sigma: float = DEFAULT_SIGMA

    def __post_init__(self):
        if not self.length_scale > 0:
            raise NonpositiveLengthScale(self.length_scale)
        if not self.noise_sigma >= 0:
            raise InputError(f"noise_sigma must be >= 0, got {self.noise_sigma!r}")


@dataclass(frozen=True)
class SearchConfig:
    """Deterministic hyperparameter search.

    The grid spans ``[grid_low, grid_high] * range(x)`` with ``n_grid``
    log-spaced length scales.  Refinement starts at the grid spacing (in
    log ``l``) and halves the step whenever neither neighbour improves the
    loss by more than ``rel_tol``; it stops once both neighbours are within
    ``rel_tol`` of the incumbent or after ``max_iter`` iterations.
    """

    n_grid: int = 25
    grid_low: float = 0.01
    grid_high: float = 10.0
    refine: bool = True
    max_iter: int = 100
    rel_tol: float = 1e-8
    jitter: float = DEFAULT_JITTER
    max_jitter: float = MAX_JITTER

    def validate(self):
        if self.n_grid < 1 or not (0 < self.grid_low < self.grid_high) or self.max_iter < 0:
            raise SearchRangeInvalid(
                f"invalid search range: n_grid={self.n_grid}, "
                f"grid=[{self.grid_low}, {self.grid_high}], max_iter={self.max_iter}"
            )
        if self.jitter < 0 or self.max_jitter < self.jitter:
            raise SearchRangeInvalid("jitter must satisfy 0 <= jitter <= max_jitter")


def _sqdist(a, b):
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    return (a[:, None] - b[None, :]) ** 2


def rbf_kernel(x, x2, l):
    """``exp(-(x - x2)^2 / (2 l^2))``; broadcasts over array arguments."""
    if not l > 0:
        raise NonpositiveLengthScale(l)
    out = np.exp(-((np.asarray(x, dtype=float) - np.asarray(x2, dtype=float)) ** 2) / (2.0 * l * l))
    return float(out) if out.ndim == 0 else out


def _gram(a, b, l):
    if not l > 0:
        raise NonpositiveLengthScale(l)
    return np.exp(-_sqdist(a, b) / (2.0 * l * l))


def build_gram(train_x, query_x, hyper: GprHyperparams):
    """Return ``(K + sigma^2 I, kappa, K_hat)``.

    ``kappa[i, j] = k(query_x[i], train_x[j])`` and ``K_hat`` is the
    query-query prior covariance.  No jitter is included here.
    """
    train_x = np.asarray(train_x, dtype=float).ravel()
    query_x = np.asarray(query_x, dtype=float).ravel()
    if train_x.size == 0:
        raise EmptyTraining()
    l = hyper.length_scale
    k_noisy = _gram(train_x, train_x, l)
    k_noisy[np.diag_indices_from(k_noisy)] += hyper.noise_sigma ** 2
    return k_noisy, _gram(query_x, train_x, l), _gram(query_x, query_x, l)


def _jitter_sequence(start, stop):
    j = start
    yield j
    j = DEFAULT_JITTER if j == 0 else j * 10.0
    while j <= stop * (1 + 1e-12):
        yield j
        j *= 10.0


def _factor(x, l, sigma, jitter=DEFAULT_JITTER, max_jitter=MAX_JITTER):
    """Lower Cholesky factor of ``K + (sigma^2 + jitter) I`` and the jitter used."""
    a = _gram(x, x, l)
    diag = np.diag_indices_from(a)
    base = a[diag].copy() + sigma ** 2
    last = jitter
    for j in _jitter_sequence(jitter, max_jitter):
        last = j
        a[diag] = base + j
        try:
            return linalg.cholesky(a, lower=True, check_finite=False), j
        except linalg.LinAlgError:
            continue
    raise FactorizationFailure(last)


def _cho_solve(chol, b):
    return linalg.cho_solve((chol, True), b, check_finite=False)


def _logdet(chol):
    return 2.0 * float(np.sum(np.log(np.diag(chol))))


def _profile(x, y, l, sigma, jitter, max_jitter):
    """Factor once; return (loss, b0, chol, jitter) with b0 at its l-conditional optimum."""
    chol, used = _factor(x, l, sigma, jitter, max_jitter)
    ones = np.ones_like(y)
    solved = _cho_solve(chol, np.column_stack([y, ones]))
    b0 = float(ones @ solved[:, 0]) / float(ones @ solved[:, 1])
    r = y - b0
    loss = float(r @ _cho_solve(chol, r)) + _logdet(chol)
    return loss, b0, chol, used


def nll(l, b0, train_x, train_y, sigma=DEFAULT_SIGMA, jitter=DEFAULT_JITTER, max_jitter=MAX_JITTER):
    """Training loss at ``(l, b0)`` via a Cholesky factorization.

    Equals ``sum_i beta_i^2/(k_i + s) + log(k_i + s)`` with ``k_i`` the
    eigenvalues of the Gram matrix, ``beta`` the residual ``y - b0`` in its
    eigenbasis and ``s = sigma^2 + jitter``.
    """
    x = np.asarray(train_x, dtype=float).ravel()
    y = np.asarray(train_y, dtype=float).ravel()
    chol, _ = _factor(x, l, sigma, jitter, max_jitter)
    r = y - b0
    return float(r @ _cho_solve(chol, r)) + _logdet(chol)


def nll_eigen(l, b0, train_x, train_y, sigma=DEFAULT_SIGMA, jitter=0.0):
    """Same loss as :func:`nll`, evaluated through an eigendecomposition of K."""
    x = np.asarray(train_x, dtype=float).ravel()
    y = np.asarray(train_y, dtype=float).ravel()
    k, vecs = linalg.eigh(_gram(x, x, l), check_finite=False)
    beta = vecs.T @ (y - b0)
    s = k + sigma ** 2 + jitter
    if np.any(s <= 0):
        raise FactorizationFailure(jitter)
    return float(np.sum(beta ** 2 / s) + np.sum(np.log(s)))


def nll_grad(l, b0, train_x, train_y, sigma=DEFAULT_SIGMA, jitter=DEFAULT_JITTER):
    """Analytic ``(dL/dl, dL/db0)``."""
    x = np.asarray(train_x, dtype=float).ravel()
    y = np.asarray(train_y, dtype=float).ravel()
    chol, _ = _factor(x, l, sigma, jitter)
    alpha = _cho_solve(chol, y - b0)
    dk = _gram(x, x, l) * _sqdist(x, x) / l ** 3
    a_inv = _cho_solve(chol, np.eye(x.size))
    d_l = -float(alpha @ dk @ alpha) + float(np.sum(a_inv * dk))
    d_b0 = -2.0 * float(np.sum(alpha))
    return d_l, d_b0


def optimal_mean_offset(l, train_x, train_y, sigma=DEFAULT_SIGMA, jitter=DEFAULT_JITTER):
    """The ``b0`` minimising the loss at fixed ``l``: ``1^T A^-1 y / 1^T A^-1 1``."""
    x = np.asarray(train_x, dtype=float).ravel()
    y = np.asarray(train_y, dtype=float).ravel()
    return _profile(x, y, l, sigma, jitter, MAX_JITTER)[1]


@dataclass(frozen=True)
class FitInfo:
    grid_loss: float
    loss: float
    final_step: float  # in log(l)
    iterations: int
    converged: bool


@dataclass(frozen=True, eq=False)
class GprModel:
    """A fitted GP; training arrays are stored in transformed space."""

    train_x: np.ndarray
    train_y: np.ndarray
    hyper: GprHyperparams
    transform: TransformSpec = TransformSpec()
    jitter: float = DEFAULT_JITTER
    fit_info: Optional[FitInfo] = None
    _chol: np.ndarray = field(default=None, repr=False, compare=False)
    _alpha: np.ndarray = field(default=None, repr=False, compare=False)

    kind = "gpr"

    @classmethod
    def from_hyperparams(cls, train_x, train_y, hyper, transform=TransformSpec(),
                         jitter=DEFAULT_JITTER, fit_info=None, max_jitter=MAX_JITTER):
        """Build from arrays already in transformed space, factorizing once."""
        x = np.array(train_x, dtype=float).ravel()
        y = np.array(train_y, dtype=float).ravel()
        if x.size == 0:
            raise EmptyTraining()
        if x.shape != y.shape:
            raise InputError("train_x and train_y differ in length")
        chol, used = _factor(x, hyper.length_scale, hyper.noise_sigma, jitter, max_jitter)
        alpha = _cho_solve(chol, y - hyper.mean_offset)
        x.setflags(write=False)
        y.setflags(write=False)
        return cls(x, y, hyper, transform, used, fit_info, chol, alpha)

    @property
    def n_train(self):
        return self.train_x.size

    def solve(self, v):
        """``(K + (sigma^2 + jitter) I)^{-1} v`` using the cached factor."""
        return _cho_solve(self._chol, np.asarray(v, dtype=float))

    def loss(self):
        r = self.train_y - self.hyper.mean_offset
        return float(r @ self._alpha) + _logdet(self._chol)

    def predict(self, heights, want_full_cov=False):
        return predict_gpr(self, heights, want_full_cov)

    def predict_biomass(self, records):
        return self.predict(_heights(records)).mean


def _heights(records):
    out = []
    for i, r in enumerate(records):
        if r.height_m is None:
            raise MissingField("GPR", "height_m", row=i)
        out.append(r.height_m)
    return out


@dataclass(frozen=True)
class GprPrediction:
    query_x: np.ndarray
    latent_mean: np.ndarray  # transformed-target space
    variance: np.ndarray  # diagonal of the latent covariance
    covariance: Optional[np.ndarray]  # full latent covariance when requested
    mean: np.ndarray  # back-transformed biomass

    @property
    def latent_std(self):
        return np.sqrt(np.clip(self.variance, 0.0, None))


def fit_gpr(train_x, train_y, sigma=DEFAULT_SIGMA, search: SearchConfig = SearchConfig(),
            transform: TransformSpec = TransformSpec()) -> GprModel:
    """Fit ``(l, b0)`` on raw heights/biomass (the transform is applied here)."""
    search.validate()
    if sigma < 0:
        raise InputError(f"sigma must be >= 0, got {sigma!r}")
    x = transform.forward_x(np.asarray(train_x, dtype=float).ravel())
    y = transform.forward_y(np.asarray(train_y, dtype=float).ravel())
    if x.shape != y.shape:
        raise InputError("train_x and train_y differ in length")
    if x.size < 2:
        raise DegenerateData("at least 2 training points are required")
    span = float(np.ptp(x))
    if span == 0.0:
        if sigma == 0 and search.jitter == 0:
            raise DegenerateData("all training inputs identical with zero noise and zero jitter")
        span = 1.0  # loss is flat in l; any grid will do

    def evaluate(log_l):
        return _profile(x, y, math.exp(log_l), sigma, search.jitter, search.max_jitter)

    grid = np.log(np.geomspace(search.grid_low * span, search.grid_high * span, search.n_grid))
    best_t, best = None, None
    for t in grid:
        res = evaluate(float(t))
        if best is None or res[0] < best[0]:
            best_t, best = float(t), res
    grid_loss = best[0]

    step = float(grid[1] - grid[0]) if search.n_grid > 1 else math.log(search.grid_high / search.grid_low)
    iterations, converged = 0, not search.refine
    if search.refine:
        while iterations < search.max_iter:
            iterations += 1
            f0 = best[0]
            scale = max(abs(f0), 1e-300)
            left, right = evaluate(best_t - step), evaluate(best_t + step)
            cand_t, cand = (best_t - step, left) if left[0] <= right[0] else (best_t + step, right)
            if (cand[0] < f0) and (f0 - cand[0]) / scale >= search.rel_tol:
                best_t, best = cand_t, cand
                continue
            if max(abs(left[0] - f0), abs(right[0] - f0)) / scale < search.rel_tol:
                converged = True
                break
            step *= 0.5

    loss, b0, _, _ = best
    hyper = GprHyperparams(math.exp(best_t), b0, sigma)
    info = FitInfo(grid_loss=grid_loss, loss=loss, final_step=step,
                   iterations=iterations, converged=converged)
    return GprModel.from_hyperparams(x, y, hyper, transform, search.jitter, info, search.max_jitter)


def predict_gpr(model: GprModel, query_x, want_full_cov: bool = False) -> GprPrediction:
    """Posterior mean and covariance at raw query heights.

    ``latent_mean = b0 + kappa A^-1 (y - b0)`` and
    ``cov = K_hat - kappa A^-1 kappa^T`` with ``A = K + (sigma^2 + jitter) I``.
    """
    q_raw = np.array(query_x, dtype=float).ravel()
    q = model.transform.forward_x(q_raw)
    l = model.hyper.length_scale
    # fixed-size chunks keep results independent of the batch size
    means, variances, blocks = [], [], []
    for start in range(0, q.size, _PREDICT_CHUNK):
        qc = q[start:start + _PREDICT_CHUNK]
        kappa = _gram(qc, model.train_x, l)
        means.append(model.hyper.mean_offset + kappa @ model._alpha)
        v = linalg.solve_triangular(model._chol, kappa.T, lower=True, check_finite=False)
        variances.append(1.0 - np.einsum("ij,ij->j", v, v))
        if want_full_cov:
            blocks.append(v)
    latent_mean = np.concatenate(means) if means else np.empty(0)
    variance = np.concatenate(variances) if variances else np.empty(0)
    cov = None
    if want_full_cov:
        v = np.concatenate(blocks, axis=1) if blocks else np.empty((model.n_train, 0))
        cov = _gram(q, q, l) - v.T @ v
        cov = 0.5 * (cov + cov.T)
    return GprPrediction(q_raw, latent_mean, variance, cov, model.transform.inverse_y(latent_mean))
