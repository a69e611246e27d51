"""End-to-end acceptance checks.

Each check reports through ``acceptance_report.record`` so the terminal
summary shows one PASS/FAIL line per criterion. Criteria 5 and 6 are long
Monte Carlo runs (tens of minutes to hours on one core).
"""

import math
import os
from fractions import Fraction as F
from pathlib import Path

import numpy as np
import pytest

from bicgsm.analysis import estimate_ami, estimate_complexity, find_threshold
from bicgsm.channel import Geometry, build_gain_matrix, osnr_to_sigma
from bicgsm.cli import main
from bicgsm.demapper import Demapper, brute_force_map
from bicgsm.gsm import GsmConfig, build_constellation, constellation_csv, sser_allocate, sser_symbol_set
from bicgsm.link import LinkConfig, default_workers, required_osnr, sweep_ber
from bicgsm.protograph import check_design_constraints, lift, make_ar4ja, make_code, make_eara

from acceptance_report import record

FIXTURES = Path(__file__).parent / "fixtures"

# ---------------------------------------------------------------- criterion 1


def test_c1_golden_tables():
    for kind, name in (("congsm", "table1_congsm.csv"), ("ssergsm", "table2_ssergsm.csv")):
        got = constellation_csv(build_constellation(GsmConfig(4, 2, 2), kind))
        ok = got == (FIXTURES / name).read_text()
        record(1, f"{kind} table", ok, "16 rows, exact fractions")
        assert ok


# ---------------------------------------------------------------- criterion 2


def test_c2_sser_algebra():
    levels = sser_symbol_set(2, 4)
    ok_levels = levels == [F(k, 6) for k in (1, 2, 4, 5, 7, 8, 10, 11)]
    record(2, "expanded level set", ok_levels, str([str(x) for x in levels]))
    pairs = sser_allocate(levels, 4)
    expected = [[F(1, 6), F(7, 6)], [F(2, 6), F(8, 6)], [F(4, 6), F(10, 6)], [F(5, 6), F(11, 6)]]
    ok_pairs = pairs == expected
    record(2, "per-pattern pairs", ok_pairs)
    assert ok_levels and ok_pairs


# ---------------------------------------------------------------- criterion 3


@pytest.mark.parametrize("M", [2, 4])
@pytest.mark.parametrize("kind", ["congsm", "ssergsm"])
def test_c3_demapper_equals_oracle(kind, M):
    c = build_constellation(GsmConfig(4, 2, M), kind)
    H = build_gain_matrix(Geometry(d_tx=0.5))
    dem = Demapper(c, H)
    rng = np.random.default_rng(100 + M)
    count = 2500  # four combinations, 10^4 instances in total
    X = c.vectors()
    mismatches = 0
    for _ in range(count):
        x = X[rng.integers(c.size)]
        sigma = osnr_to_sigma(H, c, 0.5, c.rho, rng.uniform(-2, 16))
        y = x @ H.T + sigma * rng.standard_normal(H.shape[0])
        La = rng.normal(0, 4, c.rho) * (rng.random(c.rho) < 0.7)
        fast = dem.demap(y[None], sigma, La[None])
        slow = brute_force_map(c, H, y, sigma, La)
        if not (np.array_equal(fast.extrinsic[0], slow.extrinsic)
                and np.array_equal(fast.aposteriori[0], slow.aposteriori)):
            mismatches += 1
    record(3, f"{kind} rho={c.rho}", mismatches == 0, f"{count} instances, {mismatches} mismatches")
    assert mismatches == 0


# ---------------------------------------------------------------- criterion 4

AMI_SAMPLES = 100_000


def test_c4_ami_limits():
    H = build_gain_matrix(Geometry(d_tx=0.5))
    ok_all = True
    for kind in ("congsm", "ssergsm"):
        for M in (2, 4):
            c = build_constellation(GsmConfig(4, 2, M), kind)
            low = estimate_ami(c, H, osnr_to_sigma(H, c, 0.5, c.rho, -40.0), AMI_SAMPLES, rng=1)
            high = estimate_ami(c, H, osnr_to_sigma(H, c, 0.5, c.rho, 40.0), AMI_SAMPLES, rng=2)
            ok_low = abs(low.I_BICGSM) <= 3 * low.stderr + 1e-9
            ok_high = abs(high.I_BICGSM - c.rho) <= 3 * high.stderr + 1e-9
            ok = ok_low and ok_high
            record(4, f"limits {kind} rho={c.rho}", ok,
                   f"low {low.I_BICGSM:.2e}+-{low.stderr:.1e}, high {high.I_BICGSM:.6f}")
            ok_all &= ok
    assert ok_all


def test_c4_ami_ordering():
    H = build_gain_matrix(Geometry(d_tx=0.5))
    sser = build_constellation(GsmConfig(4, 2, 2), "ssergsm")
    con = build_constellation(GsmConfig(4, 2, 2), "congsm")
    worst = math.inf
    for x in np.arange(0.0, 14.01, 1.0):
        a = estimate_ami(sser, H, osnr_to_sigma(H, sser, 0.5, 4, x), AMI_SAMPLES, rng=3)
        b = estimate_ami(con, H, osnr_to_sigma(H, con, 0.5, 4, x), AMI_SAMPLES, rng=3)
        worst = min(worst, a.I_BICGSM - b.I_BICGSM)
    ok = worst > 0
    record(4, "SSERGSM above ConGSM on 0..14 dB", ok, f"smallest margin {worst:.4f} bit")
    assert ok


# ---------------------------------------------------------------- criterion 5

THRESH_SAMPLES = 50_000
TOL_DB = 0.3
TABLE_IV = {  # (rho, kind, d_tx) -> OSNR threshold in dB
    (4, "ssergsm", 0.3): 5.731, (4, "ssergsm", 0.5): 4.746, (4, "ssergsm", 0.7): 3.804,
    (4, "congsm", 0.3): 9.225, (4, "congsm", 0.5): 6.846, (4, "congsm", 0.7): 5.322,
    (6, "ssergsm", 0.3): 7.603, (6, "ssergsm", 0.5): 6.585, (6, "ssergsm", 0.7): 5.278,
    (6, "congsm", 0.3): 10.612, (6, "congsm", 0.5): 8.324, (6, "congsm", 0.7): 6.196,
}
TABLE_V_FAMILIES = ("eara", "ar4ja", "ar4a", "iar4ja", "iar4a", "regular")
TABLE_V = {
    4: dict(zip(TABLE_V_FAMILIES, (5.314, 7.226, 7.145, 6.214, 6.157, 6.012))),
    6: dict(zip(TABLE_V_FAMILIES, (7.108, 8.625, 8.512, 8.028, 7.964, 7.813))),
}


def _threshold(family, e, kind, rho, d_tx):
    c = build_constellation(GsmConfig(4, 2, 2 if rho == 4 else 4), kind)
    H = build_gain_matrix(Geometry(d_tx=d_tx))
    return find_threshold(make_code(family, e), c, H, 20, 4, osnr_lo=3.0, osnr_hi=18.0,
                          resolution=0.01, samples=THRESH_SAMPLES)


@pytest.fixture(scope="module")
def table_iv():
    return {key: _threshold("ar4ja", 0, key[1], key[0], key[2]) for key in TABLE_IV}


@pytest.fixture(scope="module")
def table_v():
    return {(rho, fam): _threshold(fam, 1, "ssergsm", rho, 0.3)
            for rho in (4, 6) for fam in TABLE_V_FAMILIES}


def test_c5_table_iv_values(table_iv):
    bad = []
    for key, ref in TABLE_IV.items():
        got = table_iv[key]
        ok = abs(got - ref) <= TOL_DB
        record(5, f"IV rho={key[0]} {key[1]} d_tx={key[2]}", ok, f"{got:.3f} vs {ref:.3f} dB")
        if not ok:
            bad.append(key)
    assert not bad


def test_c5_table_v_values(table_v):
    bad = []
    for rho, refs in TABLE_V.items():
        for fam in ("eara", "ar4ja", "regular"):
            got, ref = table_v[(rho, fam)], refs[fam]
            ok = abs(got - ref) <= TOL_DB
            record(5, f"V rho={rho} {fam}", ok, f"{got:.3f} vs {ref:.3f} dB")
            if not ok:
                bad.append((rho, fam))
    assert not bad


def test_c5_orderings(table_iv, table_v):
    rows_ok = all(table_iv[(rho, "ssergsm", d)] < table_iv[(rho, "congsm", d)]
                  for rho in (4, 6) for d in (0.3, 0.5, 0.7))
    record(5, "SSERGSM < ConGSM per row", rows_ok)
    dtx_ok = all(table_iv[(rho, k, 0.3)] > table_iv[(rho, k, 0.5)] > table_iv[(rho, k, 0.7)]
                 for rho in (4, 6) for k in ("ssergsm", "congsm"))
    record(5, "thresholds decrease in d_tx", dtx_ok)
    fam_ok = True
    for rho in (4, 6):
        t = {f: table_v[(rho, f)] for f in TABLE_V_FAMILIES}
        ok = (t["eara"] < t["regular"] < min(t["iar4a"], t["iar4ja"])
              and max(t["iar4a"], t["iar4ja"]) < min(t["ar4a"], t["ar4ja"]))
        record(5, f"Table V family order rho={rho}", ok,
               " ".join(f"{f}={v:.2f}" for f, v in t.items()))
        fam_ok &= ok
    assert rows_ok and dtx_ok and fam_ok


# ---------------------------------------------------------------- criterion 6

TARGET_BER = 1e-4
STEP_DB = 0.25
SEARCH_BITS = 10_000_000
# confirmation budgets: a point just above the target keeps running until it
# has 100 frame errors (about 2.4e8 bits at BER 1e-4 with 3600-bit frames).
# BICGSM_BER_BUDGET_SCALE shrinks them on machines with few cores; the
# budgets used are printed with the frame-error sub-check.
BUDGET_SCALE = float(os.environ.get("BICGSM_BER_BUDGET_SCALE", "1"))
ABOVE_BITS = max(SEARCH_BITS, int(400_000_000 * BUDGET_SCALE))
BELOW_BITS = max(SEARCH_BITS, int(100_000_000 * BUDGET_SCALE))


def ber_crossing(start: float, **kwargs):
    """OSNR at which the BER curve crosses the target.

    Steps by ``STEP_DB`` from ``start`` until the target is bracketed and
    halves the bracket once, at the ``SEARCH_BITS`` budget. The two points
    bracketing the target are then re-run with the confirmation budgets
    (same frames, extended), repeating the search if the bracket moves.
    The crossing is interpolated in log-BER.
    """
    points, budget = {}, {}

    def at(x, max_bits=SEARCH_BITS):
        x = round(x, 4)
        if budget.get(x, 0) < max_bits:
            cfg = LinkConfig(osnr_db=(x,), max_bits=max_bits, **kwargs)
            points[x] = sweep_ber(cfg, workers=default_workers())[0]
            budget[x] = max_bits
        return points[x]

    def bracket():
        xs = sorted(points)
        for a, b in zip(xs, xs[1:]):
            if points[a].ber >= TARGET_BER > points[b].ber:
                return a, b
        return None

    at(start)
    for _ in range(60):
        pair = bracket()
        if pair is None:
            xs = sorted(points)
            at(xs[-1] + STEP_DB if points[xs[-1]].ber >= TARGET_BER else xs[0] - STEP_DB)
        elif pair[1] - pair[0] > 0.5 * STEP_DB + 1e-9:
            at(0.5 * (pair[0] + pair[1]))
        elif budget[pair[0]] < ABOVE_BITS or budget[pair[1]] < BELOW_BITS:
            at(pair[0], ABOVE_BITS)
            at(pair[1], BELOW_BITS)
        else:
            break
    else:
        raise RuntimeError("target BER not bracketed: " + _describe(
            [points[k] for k in sorted(points)]))
    stats = [points[k] for k in sorted(points)]
    return required_osnr(stats, TARGET_BER), stats


def _describe(stats):
    return "; ".join(f"{s.osnr_db:.3f}:{s.ber:.1e}({s.frame_errors}fe/{s.frames}fr)"
                     for s in stats)


def _record_statistics(label, crossing, stats):
    """Frame-error count behind the crossing, as a separate sub-check."""
    above = max((s for s in stats if s.osnr_db <= crossing and s.ber >= TARGET_BER),
                key=lambda s: s.osnr_db)
    below = min((s for s in stats if s.osnr_db >= crossing), key=lambda s: s.osnr_db)
    ok = above.frame_errors >= 100
    record(6, f"{label} frame errors at bracketing points", ok,
           f"{above.osnr_db:.3f} dB: {above.frame_errors} fe in {above.bits:.2e} bits, "
           f"{below.osnr_db:.3f} dB: {below.frame_errors} fe in {below.bits:.2e} bits "
           f"(budgets {ABOVE_BITS:.0e}/{BELOW_BITS:.0e})")
    return ok


AR4JA_HALF = dict(family="ar4ja", e=0, Z=1800, geometry=Geometry(d_tx=0.5), G1=20,
                  min_frame_errors=100, max_frames=10**9)


@pytest.fixture(scope="module")
def ssergsm_g2():
    return {g2: ber_crossing(7.5, kind="ssergsm", M=2, **dict(AR4JA_HALF, G2=g2))
            for g2 in (4, 2, 0)}


def test_c6a_ssergsm_gain_over_congsm(ssergsm_g2):
    sser, _ = ssergsm_g2[4]
    # start near the ConGSM waterfall; the start only affects run time
    con, stats = ber_crossing(sser + 1.25, kind="congsm", M=2, **dict(AR4JA_HALF, G2=4))
    gain = con - sser
    ok = abs(gain - 2.4) <= 0.5
    record(6, "(a) SSERGSM gain over ConGSM", ok,
           f"{gain:.2f} dB (SSERGSM {sser:.2f}, ConGSM {con:.2f}; ConGSM pts {_describe(stats)})")
    stats_ok = _record_statistics("(a) ConGSM G2=4", con, stats)
    assert ok and stats_ok


def test_c6b_outer_iterations(ssergsm_g2):
    x = {g2: ssergsm_g2[g2][0] for g2 in (0, 2, 4)}
    monotone = x[0] > x[2] > x[4]
    total = x[0] - x[4]
    ok = monotone and abs(total - 0.86) <= 0.3
    record(6, "(b) G2 0->2->4", ok,
           f"{x[0]:.2f} > {x[2]:.2f} > {x[4]:.2f}, total {total:.2f} dB")
    assert ok


RATE_TWO_THIRDS = dict(e=1, kind="ssergsm", M=2, geometry=Geometry(d_tx=0.3), G1=20, G2=4,
                       min_frame_errors=100, max_frames=10**9)
INFO_LEN = 3600


@pytest.fixture(scope="module")
def rate_two_thirds():
    out = {}
    for family, start in (("eara", 9.0), ("regular", 9.0), ("ar4ja", 9.5)):
        base = make_code(family, 1)
        Z = INFO_LEN // (base.cols - base.rows)
        out[family] = ber_crossing(start, family=family, Z=Z, **RATE_TWO_THIRDS)
    return out


def test_c6c_eara_ordering(rate_two_thirds):
    x = {f: v[0] for f, v in rate_two_thirds.items()}
    vs_reg = x["regular"] - x["eara"]
    vs_ar4ja = x["ar4ja"] - x["eara"]
    ok_reg = abs(vs_reg - 0.4) <= 0.3
    ok_ar4ja = vs_ar4ja >= 1.5
    record(6, "(c) EARA vs regular", ok_reg, f"{vs_reg:.2f} dB")
    record(6, "(c) EARA vs AR4JA", ok_ar4ja,
           f"{vs_ar4ja:.2f} dB (EARA {x['eara']:.2f}, regular {x['regular']:.2f}, "
           f"AR4JA {x['ar4ja']:.2f})")
    assert ok_reg and ok_ar4ja


def test_c6_point_statistics(ssergsm_g2, rate_two_thirds):
    ok = True
    for g2, (x, stats) in sorted(ssergsm_g2.items()):
        ok &= _record_statistics(f"SSERGSM G2={g2}", x, stats)
    for family, (x, stats) in rate_two_thirds.items():
        ok &= _record_statistics(f"{family} R=2/3", x, stats)
    assert ok


# ---------------------------------------------------------------- criterion 7


def test_c7_rates_and_constraints():
    rates_ok = all(make_code(f, e).rate_fraction == F(e + 1, e + 2)
                   for f in ("eara", "ar4ja") for e in (0, 1, 2))
    record(7, "rate (e+1)/(e+2)", rates_ok)
    eara_ok = check_design_constraints(make_eara(0)).all_pass
    record(7, "EARA mother passes design rules", eara_ok)
    ar4ja_flag = "punctured_degree_one" in check_design_constraints(make_ar4ja(0)).failures()
    record(7, "AR4JA puncture rule flagged", ar4ja_flag)
    assert rates_ok and eara_ok and ar4ja_flag


@pytest.mark.parametrize("Z", [64, 1800])
@pytest.mark.parametrize("family", ["eara", "ar4ja"])
def test_c7_lift_invariants(family, Z):
    base = make_code(family, 0)
    code = lift(base, Z)
    col_deg = np.asarray(code.H.sum(axis=0)).ravel()
    row_deg = np.asarray(code.H.sum(axis=1)).ravel()
    ok = (np.array_equal(code.block_counts(), base.matrix)
          and np.array_equal(col_deg, np.repeat(base.col_degrees, Z))
          and np.array_equal(row_deg, np.repeat(base.row_degrees, Z))
          and not code.has_four_cycles())
    record(7, f"{family} Z={Z} degrees and girth>=6", ok)
    assert ok


# ---------------------------------------------------------------- criterion 8


def test_c8_determinism(tmp_path):
    args = ["--mode", "ber-sweep", "--osnr", "6:7.5:0.5", "--frames", "6", "--seed", "42",
            "--set", "code.Z=64", "--quiet"]
    outs = []
    for i, workers in enumerate((1, 1, 2, 3)):
        path = tmp_path / f"run{i}.csv"
        assert main(args + ["--workers", str(workers), "--out", str(path)]) == 0
        outs.append(path.read_bytes())
    ok_ber = all(o == outs[0] for o in outs)
    record(8, "ber-sweep CSV identical over reruns and 1/2/3 workers", ok_ber)
    ami = []
    for i in range(2):
        path = tmp_path / f"ami{i}.csv"
        assert main(["--mode", "ami-sweep", "--osnr", "4:6:1", "--set", "analysis.samples=10000",
                     "--quiet", "--out", str(path)]) == 0
        ami.append(path.read_bytes())
    ok_ami = ami[0] == ami[1]
    record(8, "ami-sweep CSV identical over reruns", ok_ami)
    assert ok_ber and ok_ami


# ---------------------------------------------------------------- criterion 9


def test_c9_complexity_coefficients():
    c = estimate_complexity(n=10, m=4, p=2, g_v=3, g_c=5, T1=1, T2=0, rho=2, N_t=2, N_r=1)
    dec_ok = (c.RA, c.RM) == (4 * 2, 2 * 10 * 5)
    c = estimate_complexity(n=10, m=4, p=2, g_v=3, g_c=5, T1=0, T2=1, rho=2, N_t=2, N_r=1)
    dem_ok = (c.RA, c.RM) == (8 * (4 * 3 + 2), 4 * 8 * 7)
    args = dict(n=6300, m=2700, p=900, g_v=3.0, g_c=7.0, rho=4, N_t=4, N_r=4)
    a, b = estimate_complexity(T1=3, T2=1, **args), estimate_complexity(T1=6, T2=2, **args)
    lin_ok = b.RA == pytest.approx(2 * a.RA) and b.RM == pytest.approx(2 * a.RM)
    ok = dec_ok and dem_ok and lin_ok
    record(9, "exact coefficients and linearity", ok)
    assert ok


def test_c9_eara_complexity(rate_two_thirds):
    crossing, stats = rate_two_thirds["eara"]
    # first point past the crossing, where decoding mostly succeeds
    s = min((s for s in stats if s.osnr_db >= crossing), key=lambda s: s.osnr_db)
    base = make_code("eara", 1)
    Z = INFO_LEN // (base.cols - base.rows)
    deg = base.col_degrees.sum()
    est = estimate_complexity(n=Z * base.cols, m=Z * base.rows, p=Z * len(base.punctured),
                              g_v=deg / base.cols, g_c=deg / base.rows,
                              T1=s.avg_T1, T2=s.avg_T2, rho=4, N_t=4, N_r=4)
    ra_ratio, rm_ratio = est.RA / 2.642e6, est.RM / 6.602e6
    ok = 0.5 <= ra_ratio <= 2 and 0.5 <= rm_ratio <= 2
    record(9, "EARA operation counts within 2x", ok,
           f"T1={s.avg_T1:.2f} T2={s.avg_T2:.2f} at {s.osnr_db:.2f} dB: "
           f"RA {est.RA:.3e} ({ra_ratio:.2f}x), RM {est.RM:.3e} ({rm_ratio:.2f}x)")
    assert ok
