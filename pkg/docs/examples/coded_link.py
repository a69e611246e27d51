"""Decoding threshold and simulated BER of a short AR4JA-coded SSERGSM link.

Run with ``python3 docs/examples/coded_link.py``; takes under a minute.
The block is deliberately short (Z=64); use Z=1800 for 3600 information bits.
"""

from bicgsm import Geometry, GsmConfig, build_constellation, build_gain_matrix, make_code
from bicgsm.analysis import find_threshold
from bicgsm.link import LinkConfig, required_osnr, sweep_ber

geometry = Geometry(d_tx=0.5)
H = build_gain_matrix(geometry)
c = build_constellation(GsmConfig(4, 2, 2), "ssergsm")

threshold = find_threshold(make_code("ar4ja", 0), c, H, G1=20, G2=4, osnr_lo=3.0,
                           osnr_hi=15.0, resolution=0.05, samples=20_000)
print(f"asymptotic OSNR threshold: {threshold:.2f} dB")

config = LinkConfig(family="ar4ja", Z=64, kind="ssergsm", geometry=geometry, G2=4,
                    osnr_db=(7.0, 7.5, 8.0, 8.5, 9.0), max_frames=300, min_frame_errors=30)
stats = sweep_ber(config, progress=lambda s: print(
    f"{s.osnr_db:5.2f} dB  BER {s.ber:.2e}  FER {s.fer:.2e}  T1 {s.avg_T1:.1f}  T2 {s.avg_T2:.2f}"))
print(f"OSNR at BER 1e-3: {required_osnr(stats, 1e-3):.2f} dB")
