"""Protograph-LDPC-coded generalized spatial modulation for MIMO-VLC.

Modules
-------
gsm       constellation construction (ConGSM, SSERGSM) and bit mapping
channel   LOS Lambertian gain matrix and OSNR/noise conversion
demapper  max-log (optionally log-MAP) soft demapper and its brute-force oracle
protograph base matrices, design-rule checks and two-stage lifting
ldpc      GF(2) encoder and sum-product decoder
link      iterative demapping/decoding link and BER sweeps
analysis  AMI, demapper transfer, protograph EXIT thresholds, complexity
cli       command-line front end
"""

from .channel import Geometry, build_gain_matrix, osnr_to_sigma
from .gsm import GsmConfig, GsmConstellation, build_constellation, map_bits
from .protograph import BaseMatrix, LiftedCode, lift, make_code

__all__ = [
    "BaseMatrix", "Geometry", "GsmConfig", "GsmConstellation", "LiftedCode",
    "build_constellation", "build_gain_matrix", "lift", "make_code", "map_bits",
    "osnr_to_sigma",
]
__version__ = "0.1.0"
