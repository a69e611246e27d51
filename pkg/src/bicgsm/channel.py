"""Line-of-sight MIMO-VLC channel.

LEDs hang from the ceiling facing straight down and photodetectors lie on a
horizontal plane facing straight up, so irradiance and incidence angles are
equal and follow from the vertical separation and the lateral offset.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class Geometry:
    """Room and transceiver parameters (defaults: 4x4 indoor setup).

    Distances are in metres, angles in degrees, ``area`` in square metres.
    LEDs and PDs are placed on centred square grids with spacings ``d_tx``
    and ``d_rx``; element ``k`` of each grid sits at row ``k // side``,
    column ``k % side``.
    """

    room_x: float = 5.0
    room_y: float = 5.0
    room_z: float = 3.0
    d_tx: float = 0.5
    d_rx: float = 0.1
    tx_height: float = 3.0
    rx_height: float = 0.75
    phi_half: float = 8.0
    psi_half: float = 55.0
    epsilon: float = 0.434
    area: float = 7e-6
    N_t: int = 4
    N_r: int = 4

    def __post_init__(self):
        errors = self.problems()
        if errors:
            raise ValueError("; ".join(errors))

    def problems(self) -> list[str]:
        errs = []
        for name in ("room_x", "room_y", "room_z", "d_tx", "d_rx", "epsilon", "area"):
            if not getattr(self, name) > 0:
                errs.append(f"{name}={getattr(self, name)} must be > 0")
        for name in ("phi_half", "psi_half"):
            if not 0 < getattr(self, name) < 90:
                errs.append(f"{name}={getattr(self, name)} must lie in (0, 90) degrees")
        if not self.tx_height > self.rx_height:
            errs.append(
                f"tx_height={self.tx_height} must exceed rx_height={self.rx_height}"
            )
        for name in ("N_t", "N_r"):
            n = getattr(self, name)
            if n < 1 or math.isqrt(n) ** 2 != n:
                errs.append(f"{name}={n} must be a positive perfect square")
        return errs

    @property
    def lambert_order(self) -> float:
        return lambert_order(self.phi_half)

    @classmethod
    def from_dict(cls, data: dict) -> "Geometry":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise KeyError(f"unknown geometry keys: {', '.join(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, path) -> "Geometry":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return asdict(self)


def lambert_order(phi_half_deg: float) -> float:
    """Lambertian mode number ``-ln 2 / ln cos(phi_half)``."""
    return -math.log(2.0) / math.log(math.cos(math.radians(phi_half_deg)))


def grid_positions(count: int, spacing: float, centre) -> np.ndarray:
    """(x, y) of ``count`` elements on a centred square grid."""
    side = math.isqrt(count)
    offsets = (np.arange(side) - (side - 1) / 2.0) * spacing
    rows, cols = np.divmod(np.arange(count), side)
    return np.column_stack([centre[0] + offsets[cols], centre[1] + offsets[rows]])


def build_gain_matrix(geom: Geometry) -> np.ndarray:
    """LOS DC gains ``h_ij`` from LED j to PD i, shape ``(N_r, N_t)``."""
    centre = (geom.room_x / 2.0, geom.room_y / 2.0)
    led = grid_positions(geom.N_t, geom.d_tx, centre)
    pd = grid_positions(geom.N_r, geom.d_rx, centre)
    height = geom.tx_height - geom.rx_height
    if height <= 0:
        raise ValueError("LED and PD planes coincide or are inverted")

    lateral = np.linalg.norm(pd[:, None, :] - led[None, :, :], axis=-1)
    dist2 = lateral**2 + height**2
    cos_angle = height / np.sqrt(dist2)
    # irradiance and incidence angles coincide for vertical normals
    psi = np.degrees(np.arccos(cos_angle))
    eta = geom.lambert_order
    h = geom.epsilon * (eta + 1) * geom.area * cos_angle**eta * cos_angle / (2 * np.pi * dist2)
    h[psi > geom.psi_half] = 0.0
    return h


def received_power(H: np.ndarray, I: float) -> float:
    """Average received optical power ``(1/N_r) sum_ij h_ij I``."""
    return float(np.sum(H) * I / H.shape[0])


def emitted_intensity(source) -> float:
    """Average emitted intensity ``I``: a number, or ``I_a`` of a constellation."""
    config = getattr(source, "config", None)
    return float(config.I_a if config is not None else source)


def osnr_to_sigma(H: np.ndarray, source, rate: float, rho: int, osnr_db: float) -> float:
    """Noise standard deviation giving the requested optical SNR.

    OSNR = P_rx / (sqrt(2 R rho) sigma) with ``P_rx = (1/N_r) sum h_ij I``
    and ``I = I_a``, expressed in dB as ``10 log10``.  ``source`` is either a
    constellation (its ``I_a`` is used) or the intensity itself.
    """
    if not 0 < rate <= 1:
        raise ValueError(f"code rate {rate} outside (0, 1]")
    if osnr_db == math.inf:
        return 0.0
    if not math.isfinite(osnr_db):
        raise ValueError(f"OSNR must be finite or +inf, got {osnr_db}")
    osnr = 10.0 ** (osnr_db / 10.0)
    return received_power(H, emitted_intensity(source)) / (math.sqrt(2.0 * rate * rho) * osnr)


def sigma_to_osnr_db(H: np.ndarray, source, rate: float, rho: int, sigma: float) -> float:
    if sigma == 0:
        return math.inf
    p_rx = received_power(H, emitted_intensity(source))
    return 10.0 * math.log10(p_rx / (math.sqrt(2.0 * rate * rho) * sigma))


def transmit(H: np.ndarray, x: np.ndarray, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Apply ``y = H x + w``; ``x`` may be one vector or a batch ``(K, N_t)``."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("optical intensities must be nonnegative")
    y = x @ H.T
    if sigma > 0:
        y = y + sigma * rng.standard_normal(y.shape)
    return y


@dataclass(frozen=True)
class ChannelModel:
    """Gain matrix plus the noise level for one operating point."""

    H: np.ndarray
    sigma: float
    I: float

    @property
    def P_rx(self) -> float:
        return received_power(self.H, self.I)

    @classmethod
    def at_osnr(cls, H, source, rate, rho, osnr_db) -> "ChannelModel":
        return cls(H=H, sigma=osnr_to_sigma(H, source, rate, rho, osnr_db),
                   I=emitted_intensity(source))


def gain_matrix_csv(H: np.ndarray, geom: Geometry | None = None) -> str:
    buf = io.StringIO()
    if geom is not None:
        buf.write("# " + json.dumps(geom.to_dict(), sort_keys=True) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["pd"] + [f"led{j + 1}" for j in range(H.shape[1])])
    for i, row in enumerate(H):
        writer.writerow([f"pd{i + 1}"] + [repr(float(v)) for v in row])
    return buf.getvalue()
