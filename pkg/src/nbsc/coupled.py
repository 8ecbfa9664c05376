"""Spatially-coupled DE for the (dv, dc, m, L, w) ensemble.

The state X stacks ``L + w - 1`` CCDF rows (check-side positions). One update is
``X <- A^T f(A g(X); eps)`` where ``A`` is the L x (L+w-1) banded averaging
matrix: variable position t reads check positions t..t+w-1.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .de import (DeConfig, EnsembleParams, bisect_threshold, bp_threshold_uncoupled,
                 channel_ccdf, channel_pmf_batch, f_ccdf_given_channel, g_ccdf)


@dataclass(frozen=True)
class CouplingMatrix:
    L: int
    w: int
    A: np.ndarray

    @property
    def n_positions(self):
        return self.L + self.w - 1


def build_coupling_matrix(L: int, w: int) -> CouplingMatrix:
    if L < 1 or w < 1:
        raise ValueError(f"need L >= 1 and w >= 1, got L={L}, w={w}")
    A = np.zeros((L, L + w - 1))
    for t in range(L):
        A[t, t:t + w] = 1.0 / w
    A.setflags(write=False)
    return CouplingMatrix(L, w, A)


@dataclass
class CoupledState:
    X: np.ndarray
    eps_mask: np.ndarray  # length L, 1 where the channel acts

    @classmethod
    def initial(cls, eps, params, M: CouplingMatrix):
        X = np.tile(channel_ccdf(eps, params.m), (M.n_positions, 1))
        return cls(X, np.ones(M.L))


@dataclass
class CoupledResult:
    state: CoupledState
    decoded: bool
    converged: bool
    iterations: int
    snapshots: np.ndarray | None  # (recorded iterations, positions, m)
    profile_iters: np.ndarray | None = None
    states: list | None = None

    @property
    def profile(self):
        """Per-position sup-norm history, shape (recorded iterations, positions)."""
        return None if self.snapshots is None else self.snapshots.max(axis=-1)

    def __iter__(self):
        return iter((self.state, self.decoded, self.profile))


def window_mean(G, w):
    """``A @ G`` without forming A: row t is the mean of rows t..t+w-1."""
    L = G.shape[0] - w + 1
    acc = G[0:L].copy()
    for k in range(1, w):
        acc += G[k:k + L]
    return acc / w


def window_spread(F, w):
    """``A.T @ F``: row i averages the rows t of F with t <= i <= t+w-1."""
    L = F.shape[0]
    out = np.zeros((L + w - 1,) + F.shape[1:])
    for k in range(w):
        out[k:k + L] += F
    return out / w


def coupled_update(S: CoupledState, eps, params: EnsembleParams, M: CouplingMatrix,
                   channel=None) -> CoupledState:
    """One step ``X <- A^T f(A g(X); eps)``; ``channel`` caches the per-row channel pmfs."""
    if channel is None:
        channel = channel_pmf_batch(eps * S.eps_mask, params.m)
    Y = window_mean(g_ccdf(S.X, params), M.w)
    F = f_ccdf_given_channel(Y, channel, params)
    return CoupledState(window_spread(F, M.w), S.eps_mask)


class DeadlineExceeded(TimeoutError):
    pass


def coupled_fixed_point(eps, params: EnsembleParams, L: int, w: int,
                        cfg: DeConfig = DeConfig(), record_profile=False,
                        profile_every=1, keep_states=False, deadline=None) -> CoupledResult:
    """Iterate the coupled recursion from the all-channel initialisation.

    With ``record_profile`` the full state is sampled every ``profile_every``
    iterations (iteration 0 and the final state included). ``deadline`` is an
    absolute ``time.monotonic()`` value; exceeding it raises DeadlineExceeded.
    """
    M = build_coupling_matrix(L, w)
    S = CoupledState.initial(eps, params, M)
    channel = channel_pmf_batch(eps * S.eps_mask, params.m)
    profile, iters, states = [], [], []

    def snap(it):
        if record_profile and it % profile_every == 0:
            profile.append(S.X.copy())
            iters.append(it)
        if keep_states:
            states.append(S.X.copy())

    snap(0)
    converged = False
    it = 0
    while it < cfg.max_iters:
        if S.X.max() < cfg.zero_tol:
            converged = True
            break
        nxt = coupled_update(S, eps, params, M, channel)
        it += 1
        delta = np.abs(nxt.X - S.X).max()
        S = nxt
        snap(it)
        if delta < cfg.fp_tol:
            converged = True
            break
        if deadline is not None and it % 500 == 0 and time.monotonic() > deadline:
            raise DeadlineExceeded(f"coupled DE exceeded its time budget at iteration {it}")
    if record_profile and iters and iters[-1] != it:
        profile.append(S.X.copy())
        iters.append(it)
    decoded = bool(S.X.max() < cfg.zero_tol)
    return CoupledResult(S, decoded, converged, it,
                         np.array(profile) if record_profile else None,
                         np.array(iters) if record_profile else None,
                         states if keep_states else None)


def bp_threshold_coupled(params: EnsembleParams, L: int, w: int,
                         cfg: DeConfig = DeConfig(), deadline=None) -> float:
    """Bisection on the coupled decoded flag.

    The bracket starts at the uncoupled threshold (coupling can only help) and
    at the erasure rate matching the coupled design rate, widened to 1 if that
    point still decodes.
    """
    def decodes(eps):
        return coupled_fixed_point(eps, params, L, w, cfg, deadline=deadline).decoded

    lo = bp_threshold_uncoupled(params, cfg)
    hi = min(1.0, params.dv / params.dc * (L + w - 1) / L)
    if decodes(hi):
        lo, hi = hi, 1.0
    return bisect_threshold(decodes, lo, hi, cfg.bisect_tol)


def profile_rows(result: CoupledResult):
    """Yield (iteration, position, max_tail, x_1, ..., x_m); positions are 1-based."""
    for it, X in zip(result.profile_iters, result.snapshots):
        for pos, x in enumerate(X, start=1):
            yield (int(it), pos, float(x.max()), *map(float, x))
