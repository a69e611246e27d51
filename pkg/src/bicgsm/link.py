"""End-to-end BICGSM-ID link: encode, interleave, map, channel, iterate.

One frame runs ``G2 + 1`` demapper passes.  Each pass demaps every symbol
with the current a-priori LLRs, hands the deinterleaved extrinsic LLRs to
the BP decoder (punctured positions get 0), and, unless the decoder found a
valid codeword, feeds the decoder's extrinsic LLRs on the transmitted bits
back to the demapper.  BP restarts from scratch in every pass.

Frame ``f`` at OSNR point ``i`` draws all its randomness from
``SeedSequence([seed, i, f])``, and statistics are accumulated in frame
order, so results do not depend on how many workers computed them.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .channel import Geometry, build_gain_matrix, osnr_to_sigma, transmit
from .demapper import Demapper
from .gsm import GsmConfig, build_constellation, KINDS
from .ldpc import Decoder, get_encoder
from .protograph import FAMILY_NAMES, lift, make_code

CSV_COLUMNS = ("osnr_db", "bits", "bit_errors", "frames", "frame_errors",
               "ber", "fer", "avg_T1", "avg_T2")


@dataclass(frozen=True)
class LinkConfig:
    """Everything needed to reproduce a BER sweep.

    ``G1`` bounds the BP iterations per pass, ``G2`` the number of feedback
    passes (``G2 = 0`` is plain BICGSM without iterative demapping).  A
    point stops after ``max_frames`` frames, ``min_frame_errors`` frame
    errors or ``max_bits`` information bits, whichever comes first.
    """

    family: str = "ar4ja"
    e: int = 0
    Z: int = 1800
    kind: str = "ssergsm"
    N_t: int = 4
    N_a: int = 2
    M: int = 2
    I_a: float = 1.0
    geometry: Geometry = field(default_factory=Geometry)
    osnr_db: tuple = (4.0,)
    G1: int = 20
    G2: int = 4
    max_frames: int = 1000
    min_frame_errors: int = 100
    max_bits: int = 10_000_000
    seed: int = 0
    lift_seed: int = 0
    log_map: bool = False

    def problems(self) -> list[str]:
        errs = []
        if self.family not in FAMILY_NAMES:
            errs.append(f"family={self.family!r} not one of {FAMILY_NAMES}")
        if self.kind not in KINDS:
            errs.append(f"kind={self.kind!r} not one of {KINDS}")
        try:
            gsm = self.gsm
        except ValueError as exc:
            errs.append(str(exc))
            gsm = None
        if self.e < 0:
            errs.append(f"e={self.e} must be >= 0")
        if self.Z < 1:
            errs.append(f"Z={self.Z} must be >= 1")
        if self.G1 < 1 or self.G2 < 0:
            errs.append(f"need G1 >= 1 and G2 >= 0 (got G1={self.G1}, G2={self.G2})")
        if self.max_frames < 1:
            errs.append(f"max_frames={self.max_frames} must be >= 1")
        grid = list(self.osnr_db)
        if not grid or any(b <= a for a, b in zip(grid, grid[1:])):
            errs.append(f"OSNR grid {grid} must be non-empty and strictly increasing")
        if gsm is not None and self.family in FAMILY_NAMES and self.e >= 0 and self.Z >= 1:
            base = make_code(self.family, self.e)
            tx = self.Z * (base.cols - len(base.punctured))
            if tx % gsm.rho:
                errs.append(f"transmitted length {tx} is not divisible by rho={gsm.rho}")
        return errs

    @property
    def gsm(self) -> GsmConfig:
        return GsmConfig(self.N_t, self.N_a, self.M, self.I_a)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["osnr_db"] = list(self.osnr_db)
        return d


@dataclass
class ErrorStats:
    """Counts at one OSNR point."""

    osnr_db: float
    bits: int = 0
    bit_errors: int = 0
    frames: int = 0
    frame_errors: int = 0
    T1_total: int = 0
    T2_total: int = 0

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits if self.bits else math.nan

    @property
    def fer(self) -> float:
        return self.frame_errors / self.frames if self.frames else math.nan

    @property
    def avg_T1(self) -> float:
        return self.T1_total / self.frames if self.frames else math.nan

    @property
    def avg_T2(self) -> float:
        return self.T2_total / self.frames if self.frames else math.nan

    def add(self, frame: "DecodedFrame") -> None:
        self.frames += 1
        self.bits += frame.info_bits
        self.bit_errors += frame.bit_errors
        self.frame_errors += frame.bit_errors > 0
        self.T1_total += frame.inner_iterations
        self.T2_total += frame.outer_iterations

    def row(self) -> list:
        return [self.osnr_db, self.bits, self.bit_errors, self.frames, self.frame_errors,
                self.ber, self.fer, self.avg_T1, self.avg_T2]


@dataclass(frozen=True)
class DecodedFrame:
    """Outcome of one frame.

    ``inner_iterations`` is the total number of BP iterations over all
    demapper passes; ``outer_iterations`` counts feedback rounds, so it is
    0 when the first pass decodes and never exceeds ``G2``.
    """

    info_bits: int
    bit_errors: int
    inner_iterations: int
    outer_iterations: int
    syndrome_ok: bool
    hard_bits: np.ndarray = field(repr=False)


def make_interleaver(length: int, seed) -> tuple[np.ndarray, np.ndarray]:
    """Random permutation and its inverse; ``x[perm]`` interleaves."""
    if length < 1:
        raise ValueError("interleaver length must be >= 1")
    perm = np.random.default_rng(seed).permutation(length)
    inv = np.empty_like(perm)
    inv[perm] = np.arange(length)
    return perm, inv


class Link:
    """All frame-invariant objects of a configuration, built once."""

    def __init__(self, config: LinkConfig):
        errs = config.problems()
        if errs:
            raise ValueError("; ".join(errs))
        self.config = config
        self.base = make_code(config.family, config.e)
        self.code = lift(self.base, config.Z, seed=config.lift_seed)
        self.encoder = get_encoder(self.code)
        self.decoder = Decoder(self.code)
        self.constellation = build_constellation(config.gsm, config.kind)
        self.H = build_gain_matrix(config.geometry)
        self.demapper = Demapper(self.constellation, self.H, log_map=config.log_map)
        self.X = self.constellation.vectors()
        self.rho = self.constellation.rho
        self.tx = self.code.transmitted_bits
        self.perm, self.inv = make_interleaver(len(self.tx), [config.seed, 0x1E])
        self.weights = 1 << np.arange(self.rho - 1, -1, -1)

    def sigma(self, osnr_db: float) -> float:
        return osnr_to_sigma(self.H, self.constellation, self.code.rate, self.rho, osnr_db)

    def run_frame(self, sigma: float, rng: np.random.Generator,
                  info: np.ndarray | None = None) -> DecodedFrame:
        cfg = self.config
        if info is None:
            info = rng.integers(0, 2, self.code.k, dtype=np.uint8)
        word = self.encoder.encode_bits(info)
        coded = word[self.tx][self.perm].reshape(-1, self.rho)
        y = transmit(self.H, self.X[coded @ self.weights], sigma, rng)

        n = self.code.n
        La = np.zeros(coded.shape)
        inner = 0
        for outer in range(cfg.G2 + 1):  # outer = feedback rounds used so far
            ext = self.demapper.demap(y, sigma, La).extrinsic.ravel()
            ch = np.zeros(n)
            ch[self.tx] = ext[self.inv]
            res = self.decoder.decode(ch, cfg.G1)
            inner += res.iterations_used
            if res.syndrome_ok:
                break
            dec_ext = res.aposteriori_llrs[self.tx] - ch[self.tx]
            La = np.clip(dec_ext[self.perm], -30.0, 30.0).reshape(coded.shape)
        decided = res.hard_bits[self.encoder.info_positions]
        errors = int(np.count_nonzero(decided != info))
        return DecodedFrame(info_bits=self.code.k, bit_errors=errors,
                            inner_iterations=inner, outer_iterations=outer,
                            syndrome_ok=res.syndrome_ok, hard_bits=res.hard_bits)


def frame_rng(seed: int, point: int, frame: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, point, frame]))


def run_frame(config: LinkConfig, info=None, rng=None, osnr_db: float | None = None,
              link: Link | None = None) -> DecodedFrame:
    """Simulate one frame at ``osnr_db`` (default: first grid point)."""
    link = link or Link(config)
    osnr = config.osnr_db[0] if osnr_db is None else osnr_db
    rng = np.random.default_rng(rng)
    return link.run_frame(link.sigma(osnr), rng, info)


# worker-process state, set once per process
_WORKER_LINK: Link | None = None


def _init_worker(config: LinkConfig) -> None:
    global _WORKER_LINK
    _WORKER_LINK = Link(config)


def _run_batch(args):
    point, osnr, frames = args
    link = _WORKER_LINK
    sigma = link.sigma(osnr)
    out = []
    for f in frames:
        r = link.run_frame(sigma, frame_rng(link.config.seed, point, f))
        out.append((r.info_bits, r.bit_errors, r.inner_iterations, r.outer_iterations,
                    r.syndrome_ok))
    return out


def _done(stats: ErrorStats, cfg: LinkConfig) -> bool:
    return (stats.frames >= cfg.max_frames or stats.frame_errors >= cfg.min_frame_errors
            or stats.bits >= cfg.max_bits)


def sweep_ber(config: LinkConfig, workers: int = 1, batch: int = 8,
              progress=None) -> list[ErrorStats]:
    """BER/FER at every OSNR of ``config.osnr_db``.

    Frames are computed in batches (in parallel when ``workers > 1``) but
    merged strictly in frame order; frames past the stop point are
    discarded, so the result is independent of ``workers`` and ``batch``.
    """
    workers = max(1, int(workers))
    results = []
    pool = None
    if workers > 1:
        pool = ProcessPoolExecutor(workers, initializer=_init_worker, initargs=(config,))
    else:
        _init_worker(config)
    try:
        for point, osnr in enumerate(config.osnr_db):
            stats = ErrorStats(osnr_db=float(osnr))
            next_frame = 0
            while not _done(stats, config):
                jobs = []
                for _ in range(workers):
                    hi = min(next_frame + batch, config.max_frames)
                    if hi > next_frame:
                        jobs.append((point, float(osnr), range(next_frame, hi)))
                        next_frame = hi
                if not jobs:
                    break
                chunks = pool.map(_run_batch, jobs) if pool else map(_run_batch, jobs)
                for chunk in chunks:
                    for info_bits, errs, t1, t2, ok in chunk:
                        if _done(stats, config):
                            break
                        stats.add(DecodedFrame(info_bits, errs, t1, t2, ok, np.empty(0)))
            results.append(stats)
            if progress is not None:
                progress(stats)
    finally:
        if pool is not None:
            pool.shutdown()
    return results


def required_osnr(stats: list[ErrorStats], target_ber: float) -> float:
    """OSNR where the BER curve crosses ``target_ber``, interpolated in log-BER.

    Returns ``nan`` when the sweep does not bracket the target.
    """
    pts = [(s.osnr_db, s.ber) for s in stats if s.frames]
    for (x0, b0), (x1, b1) in zip(pts, pts[1:]):
        if b0 >= target_ber > b1:
            if b1 <= 0:
                return x1
            t = (math.log10(b0) - math.log10(target_ber)) / (math.log10(b0) - math.log10(b1))
            return x0 + t * (x1 - x0)
    return math.nan


def default_workers() -> int:
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else os.cpu_count() or 1


def config_fields() -> set[str]:
    return {f.name for f in fields(LinkConfig)}
