"""Convergence and capacity analysis for protograph-coded BICGSM-ID.

* :func:`estimate_ami` -- Monte Carlo bit-wise (BICM) mutual information of
  a GSM constellation, split into spatial- and signal-domain parts.
* :func:`demapper_transfer` -- extrinsic-information transfer of the soft
  demapper under Gaussian a-priori LLRs.
* :func:`mpexit_converges` / :func:`find_threshold` -- protograph EXIT
  analysis in which the channel mutual information of every transmitted
  variable node comes from the demapper transfer curve, iterated jointly
  with the demapper.
* :func:`estimate_complexity` -- operation counts of the iterative receiver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .channel import osnr_to_sigma, transmit
from .demapper import Demapper
from .gsm import GsmConstellation
from .protograph import BaseMatrix

# ten Brink's J-function fit (Brannstrom, Rasmussen, Grant)
_J_A1, _J_B1, _J_C1 = -0.0421061, 0.209252, -0.00640081
_J_A2, _J_B2, _J_C2, _J_D2 = 0.00181491, -0.142675, -0.0822054, 0.0549608
_J_SIGMA_STAR = 1.6363
SIGMA_MAX = 10.0

CONVERGED_MI = 1.0 - 1e-4
TRANSFER_SAMPLES = 200_000


def J(sigma):
    """Mutual information of a consistent Gaussian LLR with std ``sigma``."""
    s = np.asarray(sigma, dtype=float)
    low = _J_A1 * s**3 + _J_B1 * s**2 + _J_C1 * s
    high = 1.0 - np.exp(_J_A2 * s**3 + _J_B2 * s**2 + _J_C2 * s + _J_D2)
    out = np.where(s <= _J_SIGMA_STAR, low, np.where(s < SIGMA_MAX, high, 1.0))
    out = np.clip(out, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


_SIGMA_GRID = np.linspace(0.0, SIGMA_MAX, 200_001)
_J_GRID = np.maximum.accumulate(J(_SIGMA_GRID))


def J_inv(mi):
    """Inverse of :func:`J` by table interpolation, saturating at ``SIGMA_MAX``."""
    x = np.clip(np.asarray(mi, dtype=float), 0.0, 1.0)
    out = np.where(x > 0.0, np.interp(x, _J_GRID, _SIGMA_GRID), 0.0)
    return float(out) if out.ndim == 0 else out


def llr_mutual_information(bits: np.ndarray, llrs: np.ndarray) -> np.ndarray:
    """Time-average MI estimate ``1 - E[log2(1 + exp(-s L))]``, s = +1 for bit 0.

    Reduces over the first axis; returns one value per remaining index.
    """
    signed = np.where(np.asarray(bits) == 0, 1.0, -1.0) * llrs
    return 1.0 - np.mean(np.logaddexp(0.0, -signed), axis=0) / math.log(2.0)


def gaussian_apriori(bits: np.ndarray, mi, rng: np.random.Generator) -> np.ndarray:
    """Consistent Gaussian a-priori LLRs of mutual information ``mi`` per bit.

    ``mi`` broadcasts against ``bits``.
    """
    s = np.asarray(J_inv(mi), dtype=float)
    sign = np.where(np.asarray(bits) == 0, 1.0, -1.0)
    return sign * s**2 / 2.0 + s * rng.standard_normal(np.shape(bits))


@dataclass(frozen=True)
class AmiEstimate:
    I_SpD: float
    I_SiD: float
    I_BICGSM: float
    samples: int
    stderr: float
    stderr_spd: float = 0.0
    stderr_sid: float = 0.0


def estimate_ami(constellation: GsmConstellation, H, sigma: float, samples: int = 100_000,
                 rng: np.random.Generator | int | None = None, chunk: int = 20_000) -> AmiEstimate:
    """Monte Carlo BICM mutual information, split into SpD and SiD bits.

    For each bit position the loss term ``log2(sum_x p(y|x) / sum_{x: b=v} p(y|x))``
    is averaged over uniformly drawn labels and Gaussian noise.
    """
    rng = np.random.default_rng(rng)
    demapper = Demapper(constellation, H)
    labels = demapper.labels
    rho, rho_d = constellation.rho, constellation.rho_d
    X = constellation.vectors()
    losses = []
    for start in range(0, samples, chunk):
        k = min(chunk, samples - start)
        idx = rng.integers(constellation.size, size=k)
        y = transmit(H, X[idx], sigma, rng)
        metric = demapper.metrics(y, sigma)
        full = logsumexp(metric, axis=1)
        loss = np.empty((k, rho))
        for l in range(rho):
            same = labels[:, l][None, :] == labels[idx, l][:, None]
            part = logsumexp(np.where(same, metric, -np.inf), axis=1)
            loss[:, l] = (full - part) / math.log(2.0)
        losses.append(loss)
    loss = np.concatenate(losses)
    spd = loss[:, :rho_d].sum(axis=1)
    sid = loss[:, rho_d:].sum(axis=1)
    se = lambda v: float(np.std(v, ddof=1) / math.sqrt(len(v))) if len(v) > 1 else 0.0
    I_spd = rho_d - float(spd.mean())
    I_sid = constellation.rho_s - float(sid.mean())
    return AmiEstimate(
        I_SpD=I_spd,
        I_SiD=I_sid,
        I_BICGSM=I_spd + I_sid,
        samples=samples,
        stderr=se(spd + sid),
        stderr_spd=se(spd),
        stderr_sid=se(sid),
    )


@dataclass(frozen=True)
class TransferPoint:
    """Demapper extrinsic MI averaged over SpD and SiD bit positions."""

    I_d: float
    I_s: float
    stderr_d: float
    stderr_s: float
    rho_d: int
    rho_s: int

    @property
    def I_ch(self) -> float:
        """Bit-averaged extrinsic MI, the channel MI seen by each coded bit."""
        return (self.I_d * self.rho_d + self.I_s * self.rho_s) / (self.rho_d + self.rho_s)


def demapper_transfer(constellation: GsmConstellation, H, sigma: float, I_a_dem,
                      samples: int = TRANSFER_SAMPLES,
                      rng: np.random.Generator | int | None = None,
                      demapper: Demapper | None = None) -> TransferPoint:
    """Extrinsic MI of the demapper for a-priori MI ``I_a_dem``.

    ``I_a_dem`` is either a scalar or a sequence of MIs; with a sequence,
    every coded bit draws its a-priori quality from one entry chosen
    uniformly at random (the interleaver mixes bits of all variable-node
    types).  Labels are uniform random, so both bit values occur.
    """
    rng = np.random.default_rng(rng)
    demapper = demapper or Demapper(constellation, H)
    rho, rho_d = constellation.rho, constellation.rho_d
    idx = rng.integers(constellation.size, size=samples)
    bits = demapper.labels[idx].astype(np.uint8)
    y = transmit(H, constellation.vectors()[idx], sigma, rng)
    mi = np.asarray(I_a_dem, dtype=float)
    if mi.ndim:
        mi = mi[rng.integers(mi.size, size=bits.shape)]
    La = gaussian_apriori(bits, mi, rng)
    ext = demapper.demap(y, sigma, La).extrinsic
    per_bit = np.where(bits == 0, 1.0, -1.0) * ext
    info = 1.0 - np.logaddexp(0.0, -per_bit) / math.log(2.0)
    d = info[:, :rho_d].mean(axis=1)
    s = info[:, rho_d:].mean(axis=1)
    return TransferPoint(
        I_d=float(d.mean()),
        I_s=float(s.mean()),
        stderr_d=float(d.std(ddof=1) / math.sqrt(samples)),
        stderr_s=float(s.std(ddof=1) / math.sqrt(samples)),
        rho_d=rho_d,
        rho_s=rho - rho_d,
    )


@dataclass
class PexitState:
    """Edge and node mutual informations of a protograph EXIT run.

    Edge arrays are indexed ``[check, variable]`` and only meaningful where
    the base matrix is nonzero.
    """

    I_av: np.ndarray  # check -> variable (a-priori at the variable node)
    I_ev: np.ndarray  # variable -> check
    I_ch: np.ndarray
    I_dem_a: np.ndarray
    I_app: np.ndarray
    history: list = field(default_factory=list)


def _pexit_inner(B: np.ndarray, state: PexitState, iterations: int) -> None:
    """Standard PEXIT variable/check updates with parallel edges."""
    mask = B > 0
    s_ch2 = J_inv(state.I_ch) ** 2
    for _ in range(iterations):
        s_av2 = np.where(mask, J_inv(state.I_av) ** 2, 0.0)
        tot = (B * s_av2).sum(axis=0) + s_ch2
        state.I_ev = np.where(mask, J(np.sqrt(np.maximum(tot[None, :] - s_av2, 0.0))), 0.0)

        s_ec2 = np.where(mask, J_inv(1.0 - state.I_ev) ** 2, 0.0)
        tot_c = (B * s_ec2).sum(axis=1)
        state.I_av = np.where(mask, 1.0 - J(np.sqrt(np.maximum(tot_c[:, None] - s_ec2, 0.0))), 0.0)

    s_av2 = np.where(mask, J_inv(state.I_av) ** 2, 0.0)
    state.I_app = J(np.sqrt((B * s_av2).sum(axis=0) + s_ch2))
    # a-priori for the demapper: everything the checks know, channel excluded
    state.I_dem_a = J(np.sqrt((B * s_av2).sum(axis=0)))


def mpexit_run(base: BaseMatrix, constellation: GsmConstellation, H, osnr_db: float,
               G1: int = 20, G2: int = 4,
               samples: int = TRANSFER_SAMPLES, seed: int = 0) -> PexitState:
    """Run the joint demapper/protograph EXIT recursion at one OSNR.

    ``G2`` counts feedback rounds, so the demapper is evaluated ``G2 + 1``
    times, each followed by ``G1`` variable/check iterations.
    """
    B = np.asarray(base.entries, dtype=float)
    n_c, n_v = B.shape
    punctured = np.zeros(n_v, dtype=bool)
    punctured[list(base.punctured)] = True
    sigma = osnr_to_sigma(H, constellation, base.rate, constellation.rho, osnr_db)
    rng = np.random.default_rng(seed)
    demapper = Demapper(constellation, H)

    state = PexitState(
        I_av=np.zeros((n_c, n_v)),
        I_ev=np.zeros((n_c, n_v)),
        I_ch=np.zeros(n_v),
        I_dem_a=np.zeros(n_v),
        I_app=np.zeros(n_v),
    )
    for _ in range(G2 + 1):
        prior = state.I_dem_a[~punctured]
        point = demapper_transfer(constellation, H, sigma, prior, samples, rng, demapper)
        state.I_ch = np.where(punctured, 0.0, np.clip(point.I_ch, 0.0, 1.0))
        _pexit_inner(B, state, G1)
        state.history.append((point, state.I_app.copy()))
        if np.all(state.I_app >= CONVERGED_MI):
            break
    return state


def mpexit_converges(base: BaseMatrix, constellation: GsmConstellation, H, osnr_db: float,
                     G1: int = 20, G2: int = 4, **kwargs) -> bool:
    """True when every variable node's a-posteriori MI reaches ``1 - 1e-4``."""
    state = mpexit_run(base, constellation, H, osnr_db, G1, G2, **kwargs)
    return bool(np.all(state.I_app >= CONVERGED_MI))


def find_threshold(base: BaseMatrix, constellation: GsmConstellation, H,
                   G1: int = 20, G2: int = 4, osnr_lo: float = -5.0, osnr_hi: float = 20.0,
                   resolution: float = 0.01, votes: int = 3, seed: int = 0, **kwargs) -> float:
    """Lowest OSNR (dB) at which the EXIT recursion converges.

    Every probe is decided by majority over ``votes`` independently seeded
    runs; bisection stops once the bracket is narrower than ``resolution``.
    """

    def ok(osnr):
        wins = 0
        for v in range(votes):
            wins += mpexit_converges(base, constellation, H, osnr, G1, G2,
                                     seed=seed + 7919 * v, **kwargs)
            if wins > votes // 2 or (v + 1 - wins) > votes // 2:
                break
        return wins > votes // 2

    if ok(osnr_lo) or not ok(osnr_hi):
        raise ValueError(f"threshold not bracketed by [{osnr_lo}, {osnr_hi}] dB")
    lo, hi = osnr_lo, osnr_hi
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


@dataclass(frozen=True)
class ComplexityEstimate:
    """Real additions (RA) and multiplications (RM) per decoded frame."""

    RA: float
    RM: float
    RA_demap: float
    RM_demap: float
    RA_decode: float
    RM_decode: float
    inputs: dict


def estimate_complexity(n, m, p, g_v, g_c, T1, T2, rho, N_t, N_r) -> ComplexityEstimate:
    """Operation counts of log-MAP demapping plus LLR-BP decoding.

    ``n``/``m`` are the numbers of variable/check nodes of the lifted code,
    ``p`` the punctured variable nodes, ``g_v``/``g_c`` average node degrees
    and ``T1``/``T2`` the average numbers of inner/outer iterations per
    frame, in the units reported by ``link.ErrorStats``: total BP iterations
    and feedback rounds.
    """
    args = dict(n=n, m=m, p=p, g_v=g_v, g_c=g_c, T1=T1, T2=T2, rho=rho, N_t=N_t, N_r=N_r)
    if any(v < 0 for v in args.values()):
        raise ValueError("complexity inputs must be nonnegative")
    S = 2**rho
    ra_dem = (n - p) * (S * ((N_t + 1) * N_r + 2 * rho - 4) + 2) * T2
    rm_dem = S * (n - p) * ((N_t + 1) * N_r + rho + 2) * T2
    ra_dec = m * (g_v - 1) * T1
    rm_dec = 2 * n * g_c * T1
    return ComplexityEstimate(
        RA=ra_dem + ra_dec,
        RM=rm_dem + rm_dec,
        RA_demap=ra_dem,
        RM_demap=rm_dem,
        RA_decode=ra_dec,
        RM_decode=rm_dec,
        inputs=args,
    )
