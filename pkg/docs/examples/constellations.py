"""Compare ConGSM and SSERGSM: mapping tables and average mutual information.

Run with ``python3 docs/examples/constellations.py``; takes a few seconds.
"""

import numpy as np

from bicgsm import Geometry, GsmConfig, build_constellation, build_gain_matrix, osnr_to_sigma
from bicgsm.analysis import estimate_ami
from bicgsm.gsm import constellation_csv

config = GsmConfig(N_t=4, N_a=2, M=2)
con = build_constellation(config, "congsm")
sser = build_constellation(config, "ssergsm")

# exact intensities, in units of the average intensity I_a
print(constellation_csv(sser))

H = build_gain_matrix(Geometry(d_tx=0.5))
print("osnr_db  AMI ConGSM  AMI SSERGSM  (bits per channel use)")
for osnr in np.arange(0.0, 16.1, 2.0):
    row = []
    for c in (con, sser):
        sigma = osnr_to_sigma(H, c, 0.5, c.rho, osnr)
        row.append(estimate_ami(c, H, sigma, 20_000, rng=0).I_BICGSM)
    print(f"{osnr:7.1f}  {row[0]:10.3f}  {row[1]:11.3f}")
