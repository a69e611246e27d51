import math

import numpy as np
import pytest

from bicgsm.analysis import (
    CONVERGED_MI, J, J_inv, estimate_ami, estimate_complexity, demapper_transfer,
    find_threshold, gaussian_apriori, llr_mutual_information, mpexit_converges, mpexit_run,
)
from bicgsm.channel import Geometry, build_gain_matrix, osnr_to_sigma
from bicgsm.gsm import GsmConfig, build_constellation
from bicgsm.protograph import make_ar4ja, make_eara

from oracles import gaussian_llr_mi

H5 = build_gain_matrix(Geometry(d_tx=0.5))
SSER4 = build_constellation(GsmConfig(4, 2, 2), "ssergsm")


def test_j_matches_quadrature():
    for s in np.linspace(0.1, 7.0, 25):
        assert J(s) == pytest.approx(gaussian_llr_mi(s), abs=1e-3)


def test_j_roundtrip():
    x = np.linspace(0.01, 0.99, 199)
    assert np.max(np.abs(J(J_inv(x)) - x)) < 1e-3
    assert J_inv(0.0) == 0.0 and J(0.0) == 0.0
    assert 0.0 <= J(50.0) <= 1.0


def test_gaussian_apriori_has_requested_mi():
    rng = np.random.default_rng(0)
    bits = rng.integers(0, 2, 200_000)
    for mi in (0.2, 0.5, 0.9):
        llr = gaussian_apriori(bits, mi, rng)
        assert float(np.mean(llr_mutual_information(bits, llr))) == pytest.approx(mi, abs=0.01)


def test_ami_limits_and_additivity():
    quiet = estimate_ami(SSER4, H5, 1e-9, 20_000, rng=1)
    assert abs(quiet.I_BICGSM - 4) < 3 * quiet.stderr + 1e-9
    loud = estimate_ami(SSER4, H5, 1.0, 20_000, rng=1)
    assert abs(loud.I_BICGSM) < 3 * loud.stderr + 1e-6
    mid = estimate_ami(SSER4, H5, osnr_to_sigma(H5, 1.0, 0.5, 4, 6.0), 20_000, rng=2)
    assert mid.I_BICGSM == mid.I_SpD + mid.I_SiD
    assert 0 <= mid.I_SpD <= 2 and 0 <= mid.I_SiD <= 2


def test_transfer_limits_and_monotonicity():
    # with perfect priors only the last candidate pair is left to the channel
    loud = osnr_to_sigma(H5, 1.0, 0.5, 4, 13.0)
    top = demapper_transfer(SSER4, H5, loud, 1.0, 20_000, rng=0)
    assert top.I_d >= 0.99 and top.I_s >= 0.99
    sigma = osnr_to_sigma(H5, 1.0, 0.5, 4, 7.0)
    pts = [demapper_transfer(SSER4, H5, sigma, a, 50_000, rng=1) for a in np.linspace(0, 1, 5)]
    for p, q in zip(pts, pts[1:]):
        slack = 2 * math.hypot(p.stderr_d + p.stderr_s, q.stderr_d + q.stderr_s)
        assert q.I_ch >= p.I_ch - slack


def test_transfer_point_channel_mi_weights():
    p = demapper_transfer(SSER4, H5, osnr_to_sigma(H5, 1.0, 0.5, 4, 7.0), 0.3, 10_000, rng=3)
    assert p.I_ch == pytest.approx((2 * p.I_d + 2 * p.I_s) / 4)


def test_mpexit_noiseless_converges():
    assert mpexit_converges(make_ar4ja(0), SSER4, H5, math.inf, samples=10_000)
    assert mpexit_converges(make_eara(1), SSER4, H5, math.inf, samples=10_000)


def test_mpexit_fails_far_below_waterfall():
    H3 = build_gain_matrix(Geometry(d_tx=0.3))
    assert not mpexit_converges(make_ar4ja(0), SSER4, H3, 0.0, samples=10_000)


def test_mpexit_state_in_range_and_punctured_zero():
    state = mpexit_run(make_ar4ja(0), SSER4, H5, 6.5, samples=20_000)
    for arr in (state.I_av, state.I_ev, state.I_ch, state.I_dem_a, state.I_app):
        assert np.all((arr >= 0) & (arr <= 1))
    assert state.I_ch[1] == 0.0
    # every transmitted column shares the same channel MI
    assert len(set(np.delete(state.I_ch, 1))) == 1


def test_threshold_bracket_must_be_valid():
    with pytest.raises(ValueError):
        find_threshold(make_ar4ja(0), SSER4, H5, osnr_lo=15.0, osnr_hi=20.0, samples=10_000)


def test_threshold_is_monotone_consistent():
    base = make_ar4ja(0)
    t = find_threshold(base, SSER4, H5, osnr_lo=5.0, osnr_hi=10.0, resolution=0.05,
                       samples=20_000, seed=4)
    assert mpexit_converges(base, SSER4, H5, t + 0.1, samples=20_000, seed=4)


def test_complexity_zero_and_coefficients():
    z = estimate_complexity(9000, 5400, 1800, 3.0, 5.0, 0, 0, 4, 4, 4)
    assert (z.RA, z.RM) == (0, 0)
    c = estimate_complexity(n=10, m=4, p=2, g_v=3, g_c=5, T1=1, T2=0, rho=2, N_t=2, N_r=1)
    assert (c.RA, c.RM) == (4 * 2, 2 * 10 * 5)
    c = estimate_complexity(n=10, m=4, p=2, g_v=3, g_c=5, T1=0, T2=1, rho=2, N_t=2, N_r=1)
    # 8 * [4 * (3 * 1 + 4 - 4) + 2]  and  4 * 8 * (3 * 1 + 2 + 2)
    assert (c.RA, c.RM) == (8 * (4 * 3 + 2), 4 * 8 * 7)


def test_complexity_linear_in_iterations():
    args = dict(n=6300, m=2700, p=900, g_v=3.3, g_c=7.7, rho=4, N_t=4, N_r=4)
    a = estimate_complexity(T1=3, T2=1.5, **args)
    b = estimate_complexity(T1=6, T2=1.5, **args)
    c = estimate_complexity(T1=3, T2=3.0, **args)
    assert b.RA_decode == pytest.approx(2 * a.RA_decode) and b.RA_demap == a.RA_demap
    assert c.RM_demap == pytest.approx(2 * a.RM_demap) and c.RM_decode == a.RM_decode
    with pytest.raises(ValueError):
        estimate_complexity(T1=-1, T2=1, **args)
