"""Soft GSM demapper.

LLR convention: ``L = ln P(b=0)/P(b=1)``, so positive values favour 0.  For
bit ``l`` of a received vector ``y`` the max-log a-posteriori LLR is

    L_p(l) = L_a(l) + max_{x: b_l=0} [m(x) + Q_l(x)] - max_{x: b_l=1} [m(x) + Q_l(x)]

with ``m(x) = -||y - Hx||^2 / (2 sigma^2)`` and
``Q_l(x) = sum_{t != l} (1 - b_t(x)) L_a(t)``.

:func:`demap` is the vectorised implementation used by the receiver;
:func:`brute_force_map` walks every candidate with plain Python loops and
serves as its oracle.  Both accumulate sums in the same order so their
results agree bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gsm import GsmConstellation

LLR_CLIP = 30.0
SIGMA_FLOOR = 1e-100
MAX_ORACLE_RHO = 12


@dataclass
class LlrFrame:
    """Per-bit LLRs for one or more received symbols (last axis = bit)."""

    apriori: np.ndarray
    aposteriori: np.ndarray
    extrinsic: np.ndarray


def received_points(H: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Noise-free receive vectors ``H x`` for each row of ``X``.

    Accumulates over LEDs in index order (no BLAS) so that the oracle can
    reproduce the exact rounding.
    """
    out = np.zeros((X.shape[0], H.shape[0]))
    for j in range(H.shape[1]):
        out += X[:, j, None] * H[None, :, j]
    return out


class Demapper:
    """Max-log (or exact log-MAP) demapper bound to a constellation and channel.

    Parameters
    ----------
    constellation : GsmConstellation
    H : ndarray, shape (N_r, N_t)
    log_map : bool
        Replace the max operations by log-sum-exp.
    """

    def __init__(self, constellation: GsmConstellation, H: np.ndarray, log_map: bool = False):
        self.constellation = constellation
        self.H = np.asarray(H, dtype=float)
        self.log_map = log_map
        self.labels = constellation.labels().astype(bool)  # (S, rho)
        self.points = received_points(self.H, constellation.vectors())  # (S, N_r)
        self.rho = constellation.rho
        # the candidate sets for bit l: rows where labels[:, l] is 0 / 1
        self._zero = ~self.labels.T  # (rho, S)

    def metrics(self, y: np.ndarray, sigma: float) -> np.ndarray:
        """``-||y - Hx||^2 / 2 sigma^2`` for all candidates, shape ``(K, S)``."""
        y = np.atleast_2d(y)
        sigma = max(float(sigma), SIGMA_FLOOR)
        d2 = np.zeros((y.shape[0], self.points.shape[0]))
        for i in range(self.points.shape[1]):
            diff = y[:, i, None] - self.points[None, :, i]
            d2 += diff * diff
        return -d2 / (2.0 * sigma * sigma)

    def demap(self, y: np.ndarray, sigma: float, apriori: np.ndarray | None = None,
              chunk: int = 8192) -> LlrFrame:
        """Demap a batch of received vectors ``y`` of shape ``(K, N_r)``."""
        y = np.atleast_2d(np.asarray(y, dtype=float))
        K = y.shape[0]
        if apriori is None:
            La = np.zeros((K, self.rho))
        else:
            La = np.asarray(apriori, dtype=float).reshape(K, self.rho)
        ext = np.empty((K, self.rho))
        for start in range(0, K, chunk):
            sl = slice(start, start + chunk)
            ext[sl] = self._extrinsic(y[sl], sigma, La[sl])
        return LlrFrame(apriori=La, aposteriori=La + ext, extrinsic=ext)

    def _extrinsic(self, y, sigma, La):
        metric = self.metrics(y, sigma)  # (K, S)
        rho = self.rho
        # (1 - b_t) L_a(t) for every candidate, summed over t != l as
        # (ascending sum over t < l) + (descending sum over t > l)
        terms = [self._zero[t][None, :] * La[:, t, None] for t in range(rho)]
        below = [np.zeros_like(metric)]
        for t in range(rho - 1):
            below.append(below[-1] + terms[t])
        above = [None] * rho
        above[rho - 1] = np.zeros_like(metric)
        for t in range(rho - 1, 0, -1):
            above[t - 1] = above[t] + terms[t]

        ext = np.empty((y.shape[0], rho))
        for l in range(rho):
            total = metric + (below[l] + above[l])
            zero = self._zero[l]
            ext[:, l] = _reduce(total[:, zero], self.log_map) - _reduce(total[:, ~zero], self.log_map)
        ext = np.nan_to_num(ext, nan=0.0, posinf=LLR_CLIP, neginf=-LLR_CLIP)
        return np.clip(ext, -LLR_CLIP, LLR_CLIP)


def _reduce(values: np.ndarray, log_map: bool) -> np.ndarray:
    if values.shape[1] == 0:
        return np.full(values.shape[0], -np.inf)
    if not log_map:
        return values.max(axis=1)
    peak = values.max(axis=1)
    safe = np.where(np.isfinite(peak), peak, 0.0)
    return safe + np.log(np.exp(values - safe[:, None]).sum(axis=1))


def demap_symbol(constellation, H, y, sigma, apriori=None, log_map: bool = False) -> LlrFrame:
    """Demap a single received vector; see :class:`Demapper`."""
    frame = Demapper(constellation, H, log_map=log_map).demap(np.asarray(y)[None, :], sigma, apriori)
    return LlrFrame(frame.apriori[0], frame.aposteriori[0], frame.extrinsic[0])


def brute_force_map(constellation: GsmConstellation, H, y, sigma, apriori=None) -> LlrFrame:
    """Literal candidate-by-candidate evaluation of the max-log LLRs."""
    rho = constellation.rho
    if rho > MAX_ORACLE_RHO:
        raise ValueError(f"rho={rho} exceeds the oracle limit of {MAX_ORACLE_RHO}")
    H = np.asarray(H, dtype=float)
    y = [float(v) for v in np.asarray(y, dtype=float)]
    La = [0.0] * rho if apriori is None else [float(v) for v in apriori]
    sigma = max(float(sigma), SIGMA_FLOOR)
    X = constellation.vectors()
    labels = constellation.labels()
    n_r, n_t = H.shape

    dists = []
    for x in X:
        hx = [0.0] * n_r
        for j in range(n_t):
            for i in range(n_r):
                hx[i] += float(x[j]) * float(H[i, j])
        d2 = 0.0
        for i in range(n_r):
            diff = y[i] - hx[i]
            d2 += diff * diff
        dists.append(-d2 / (2.0 * sigma * sigma))

    ext = []
    for l in range(rho):
        best = {0: -np.inf, 1: -np.inf}
        for s, bits in enumerate(labels):
            below = 0.0
            for t in range(l):
                below += (1 - int(bits[t])) * La[t]
            above = 0.0
            for t in range(rho - 1, l, -1):
                above += (1 - int(bits[t])) * La[t]
            best[int(bits[l])] = max(best[int(bits[l])], dists[s] + (below + above))
        diff = best[0] - best[1]
        if np.isnan(diff):
            diff = 0.0
        ext.append(min(max(diff, -LLR_CLIP), LLR_CLIP))
    ext = np.array(ext)
    La = np.array(La)
    return LlrFrame(apriori=La, aposteriori=La + ext, extrinsic=ext)
