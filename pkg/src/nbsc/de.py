"""Density evolution for the (dv, dc, m) ensemble over GF(2^m) on the BEC.

Messages are dimension distributions: a pmf of length m+1 (index = dimension
of the uncertainty subspace) or, equivalently, its CCDF tail
``x = (x_1, ..., x_m)`` with ``x_i = P(dim >= i)``. The CCDF is the state the
iteration runs on; pmfs only appear inside ``f_ccdf``/``g_ccdf``.

All array functions accept leading batch dimensions.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from .subspaces import build_coeff_tensors


@dataclass(frozen=True)
class EnsembleParams:
    dv: int
    dc: int
    m: int

    def __post_init__(self):
        if self.dv < 2:
            raise ValueError(f"dv must be >= 2, got {self.dv}")
        if self.dc <= self.dv:
            raise ValueError(f"dc must exceed dv (positive rate), got dv={self.dv}, dc={self.dc}")
        if not 1 <= self.m <= 16:
            raise ValueError(f"m must be in [1, 16], got {self.m}")

    @property
    def rate(self):
        return 1 - self.dv / self.dc


@dataclass(frozen=True)
class DeConfig:
    max_iters: int = 50000
    fp_tol: float = 1e-12
    zero_tol: float = 1e-9
    bisect_tol: float = 1e-5

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")
        for name in ("fp_tol", "zero_tol", "bisect_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")


@dataclass
class DeResult:
    x: np.ndarray
    iterations: int
    decoded: bool
    converged: bool
    history: list | None = None

    def __iter__(self):
        # allows `x, iters, decoded = de_fixed_point(...)`
        return iter((self.x, self.iterations, self.decoded))


# -- pmf / ccdf conversions ---------------------------------------------------

def ccdf_to_pmf(x):
    x = np.asarray(x, dtype=float)
    shape = x.shape[:-1]
    padded = np.concatenate([np.ones(shape + (1,)), x, np.zeros(shape + (1,))], axis=-1)
    return padded[..., :-1] - padded[..., 1:]


def pmf_to_ccdf(p):
    p = np.asarray(p, dtype=float)
    return np.cumsum(p[..., ::-1], axis=-1)[..., ::-1][..., 1:]


def is_pmf(p, tol=1e-12):
    p = np.asarray(p)
    return bool(np.all(p >= -tol) and np.all(p <= 1 + tol)
                and np.all(np.abs(p.sum(axis=-1) - 1) <= tol))


def is_ccdf(x, tol=1e-12):
    """Tail vector lies in [0, 1] and is nonincreasing."""
    x = np.asarray(x)
    if np.any(x < -tol) or np.any(x > 1 + tol):
        return False
    return bool(np.all(np.diff(x, axis=-1) <= tol))


def unit_pmf(m, dim):
    e = np.zeros(m + 1)
    e[dim] = 1.0
    return e


def channel_pmf(eps, m):
    """Dimension distribution of the channel message: Binomial(m, eps)."""
    if not 0.0 <= eps <= 1.0:
        raise ValueError(f"erasure probability must be in [0, 1], got {eps}")
    return np.array([comb(m, i) * eps**i * (1 - eps) ** (m - i) for i in range(m + 1)])


def channel_ccdf(eps, m):
    return pmf_to_ccdf(channel_pmf(eps, m))


# -- message algebra ---------------------------------------------------------

def _check_pair(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape[-1] != b.shape[-1]:
        raise ValueError(f"mismatched message sizes {a.shape[-1]} and {b.shape[-1]}")
    if a.shape[-1] < 2:
        raise ValueError("a message pmf needs length m+1 >= 2")
    return a, b


def _convolve(T, a, b):
    # out[..., k] = sum_ij T[i, j, k] a[..., i] b[..., j], as two matmuls
    n = T.shape[0]
    t = (a @ T.reshape(n, n * n)).reshape(a.shape[:-1] + (n, n))
    return (b[..., None, :] @ t)[..., 0, :]


def boxdot(a, b):
    """Variable-node convolution: dimension of the intersection."""
    a, b = _check_pair(a, b)
    return _convolve(build_coeff_tensors(a.shape[-1] - 1).V, a, b)


def boxtimes(a, b):
    """Check-node convolution: dimension of the sum."""
    a, b = _check_pair(a, b)
    return _convolve(build_coeff_tensors(a.shape[-1] - 1).C, a, b)


def _fold(op, a, n):
    acc = a
    for _ in range(n - 1):
        acc = op(acc, a)
    return acc


def boxdot_power(a, n):
    return _fold(boxdot, a, n)


def boxtimes_power(a, n):
    return _fold(boxtimes, a, n)


def _as_eps(eps, batch_shape):
    eps = np.asarray(eps, dtype=float)
    if np.any(eps < 0) or np.any(eps > 1):
        raise ValueError("erasure probability must be in [0, 1]")
    return np.broadcast_to(eps, batch_shape)


def channel_pmf_batch(eps, m):
    eps = np.asarray(eps, dtype=float)[..., None]
    i = np.arange(m + 1)
    binom = np.array([comb(m, k) for k in range(m + 1)], dtype=float)
    return binom * eps**i * (1 - eps) ** (m - i)


def f_ccdf(y, eps, params: EnsembleParams):
    """Variable-node update in CCDF coordinates; ``eps`` may be per-row."""
    y = np.asarray(y, dtype=float)
    eps = _as_eps(eps, y.shape[:-1])
    return f_ccdf_given_channel(y, channel_pmf_batch(eps, params.m), params)


def f_ccdf_given_channel(y, p, params: EnsembleParams):
    """``f_ccdf`` with the channel pmf(s) already computed (hot loops reuse them)."""
    T = build_coeff_tensors(params.m).V
    acc = a = ccdf_to_pmf(y)
    for _ in range(params.dv - 2):
        acc = _convolve(T, acc, a)
    return pmf_to_ccdf(_convolve(T, p, acc))


def g_ccdf(x, params: EnsembleParams):
    """Check-node update in CCDF coordinates."""
    x = np.asarray(x, dtype=float)
    T = build_coeff_tensors(params.m).C
    acc = a = ccdf_to_pmf(x)
    for _ in range(params.dc - 2):
        acc = _convolve(T, acc, a)
    return pmf_to_ccdf(acc)


# -- Jacobians ---------------------------------------------------------------

def _pmf_tangents(m):
    # d pmf / d x_n for n = 1..m: +1 at index n, -1 at index n-1
    T = np.zeros((m, m + 1))
    for n in range(m):
        T[n, n + 1] = 1.0
        T[n, n] = -1.0
    return T


def _fold_tangent(op, a, n):
    """Value and directional derivatives of the n-fold power of ``a``.

    ``a`` has shape (..., m+1); the tangent has shape (..., m, m+1) with one
    direction per CCDF coordinate. Uses bilinearity of ``op``.
    """
    m = a.shape[-1] - 1
    da = np.broadcast_to(_pmf_tangents(m), a.shape[:-1] + (m, m + 1))
    acc, dacc = a, da
    a_exp = a[..., None, :]
    for _ in range(n - 1):
        dacc = op(dacc, np.broadcast_to(a_exp, dacc.shape)) + op(
            np.broadcast_to(acc[..., None, :], da.shape), da)
        acc = op(acc, a)
    return acc, dacc


def _tangent_to_jacobian(dpmf):
    # dpmf[..., n, k] -> J[..., i, n] = d ccdf_i / d x_n
    dccdf = pmf_to_ccdf(dpmf)
    return np.swapaxes(dccdf, -1, -2)


def g_jacobian(x, params: EnsembleParams):
    """G_d[..., i, n] = d g_i / d x_n."""
    x = np.asarray(x, dtype=float)
    _, d = _fold_tangent(boxtimes, ccdf_to_pmf(x), params.dc - 1)
    return _tangent_to_jacobian(d)


def f_jacobian(y, eps, params: EnsembleParams):
    """F_d[..., i, n] = d f_i / d y_n."""
    y = np.asarray(y, dtype=float)
    eps = _as_eps(eps, y.shape[:-1])
    p = channel_pmf_batch(eps, params.m)
    _, d = _fold_tangent(boxdot, ccdf_to_pmf(y), params.dv - 1)
    d = boxdot(np.broadcast_to(p[..., None, :], d.shape), d)
    return _tangent_to_jacobian(d)


# -- iteration ---------------------------------------------------------------

def de_step(x, eps, params):
    return f_ccdf(g_ccdf(x, params), eps, params)


def de_fixed_point(eps, params: EnsembleParams, cfg: DeConfig = DeConfig(),
                   x0=None, record=False) -> DeResult:
    """Run x <- f(g(x); eps) from the channel CCDF (or ``x0``).

    Stops when the sup-norm change drops below ``fp_tol``, the state drops
    below ``zero_tol``, or after ``max_iters`` steps.
    """
    x = channel_ccdf(eps, params.m) if x0 is None else np.array(x0, dtype=float)
    history = [x.copy()] if record else None
    converged = False
    it = 0
    while it < cfg.max_iters:
        if x.max(initial=0.0) < cfg.zero_tol:
            converged = True
            break
        nxt = de_step(x, eps, params)
        it += 1
        delta = np.abs(nxt - x).max()
        x = nxt
        if record:
            history.append(x.copy())
        if delta < cfg.fp_tol:
            converged = True
            break
    decoded = bool(x.max(initial=0.0) < cfg.zero_tol)
    return DeResult(x, it, decoded, converged, history)


def bisect_threshold(decodes, lo, hi, tol):
    """Largest eps in [lo, hi] with ``decodes(eps)`` true, assuming monotonicity.

    ``lo`` is assumed to decode and ``hi`` not to. Returns the last decoding
    point, so the result is a lower estimate within ``tol``.
    """
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if decodes(mid):
            lo = mid
        else:
            hi = mid
    return lo


def bp_threshold_uncoupled(params: EnsembleParams, cfg: DeConfig = DeConfig()) -> float:
    return bisect_threshold(lambda e: de_fixed_point(e, params, cfg).decoded,
                            0.0, 1.0, cfg.bisect_tol)
