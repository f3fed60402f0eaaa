"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with ``pytest -s tests/test_acceptance.py`` to see the per-criterion
lines; every tolerance is pinned here.
"""

import math
import time
from fractions import Fraction

import numpy as np

from rsmakit.analysis import DoFQuery, dof_closed_form, run_experiment
from rsmakit.channels import ChannelEnsembleSpec, sample_rayleigh, trial_rng
from rsmakit.model import PrecoderSolution, Scheme, SystemConfig, build_stream_layout
from rsmakit.optimizer import oma_best_wsr, solve, solve_noma_best
from rsmakit.precoders import zf_directions
from rsmakit.rates import rate_downlink, rate_uplink
from rsmakit.rates import uplink_sum_capacity


def _report(num, ok, detail, elapsed, budget):
    status = "PASS" if ok else "FAIL"
    print(f"\nACCEPTANCE {num}: {status} ({elapsed:.1f}s / budget {budget:.0f}s) - {detail}")
    assert ok, f"criterion {num}: {detail}"
    assert elapsed < budget, f"criterion {num} exceeded runtime budget"


# -- criterion 1: closed-form DoF table, exhaustive --------------------------


def _dof_reference(scheme, metric, csit, M, K, G, g, a: Fraction) -> Fraction:
    """Literal transcription of the piecewise sum/MMF-DoF formulas."""
    perfect = csit == "perfect"
    if scheme == "noma":
        if metric == "sum":
            return Fraction(min(M, G)) if perfect else max(Fraction(1), min(M, G) * a)
        if perfect:
            return Fraction(1, g) if M >= K - g + 1 else Fraction(0)
        if G == 1:
            return Fraction(1, K)
        return a / g if M >= K - g + 1 else Fraction(0)
    if scheme == "sdma":
        if metric == "sum":
            return Fraction(min(M, K)) if perfect else max(Fraction(1), min(M, K) * a)
        if perfect:
            return Fraction(1) if M >= K else Fraction(0)
        return a if M >= K else Fraction(0)
    if metric == "sum":
        return Fraction(min(M, K)) if perfect else 1 + (min(M, K) - 1) * a
    if perfect:
        return Fraction(1) if M >= K else Fraction(1, 1 + K - M)
    if M >= K:
        return (1 + (K - 1) * a) / K
    if a <= Fraction(1, 1 + K - M):
        return (1 + (M - 1) * a) / K
    return Fraction(1, 1 + K - M)


def test_criterion_1_dof_table_exhaustive():
    t0 = time.time()
    alphas = [Fraction(0), Fraction(1, 4), Fraction(1, 2), Fraction(3, 4), Fraction(1)]
    checked = 0
    for M in range(1, 9):
        for K in range(1, 9):
            groupings = [(G, K // G) for G in range(1, K + 1) if K % G == 0]
            for metric in ("sum", "mmf"):
                for csit in ("perfect", "imperfect"):
                    for a in alphas if csit == "imperfect" else [Fraction(1)]:
                        for scheme in ("sdma", "rsma"):
                            got = dof_closed_form(
                                DoFQuery(scheme, metric, csit, M, K, alpha=a)
                            )
                            ref = _dof_reference(scheme, metric, csit, M, K, 1, K, a)
                            assert got == ref, (scheme, metric, csit, M, K, a)
                            checked += 1
                        for G, g in groupings:
                            got = dof_closed_form(
                                DoFQuery("noma", metric, csit, M, K, G=G, g=g, alpha=a)
                            )
                            ref = _dof_reference("noma", metric, csit, M, K, G, g, a)
                            assert got == ref, ("noma", metric, csit, M, K, G, g, a)
                            checked += 1
    spot1 = dof_closed_form(DoFQuery("rsma", "sum", "imperfect", 4, 6, alpha=0.5))
    spot2 = dof_closed_form(DoFQuery("rsma", "mmf", "imperfect", 4, 6, alpha=0.5))
    ok = spot1 == Fraction(5, 2) and spot2 == Fraction(1, 3)
    _report(1, ok, f"{checked} table entries verified; spots 2.5 and 1/3 exact", time.time() - t0, 1.0)


# -- criterion 2: DoF-slope reproduction ---------------------------------------


def test_criterion_2_dof_slopes():
    t0 = time.time()
    res = run_experiment(
        "dof-slope", {"m": 2, "k": 2, "alpha": 0.6, "trials": 100, "m_samples": 8, "seed": 0}
    )
    slopes = {r["scheme"]: r["slope"] for r in res.rows("dof-slope-summary")}
    ok = abs(slopes["rsma"] - 1.6) <= 0.15 and abs(slopes["zf-sdma"] - 1.2) <= 0.15
    _report(
        2,
        ok,
        f"rsma slope {slopes['rsma']:.3f} (1.6±0.15), zf-sdma {slopes['zf-sdma']:.3f} (1.2±0.15)",
        time.time() - t0,
        300.0,
    )


# -- criterion 3: exact scheme reductions ---------------------------------------


def _random_solution(layout, M, P, rng):
    raw = {s.label: rng.standard_normal(M) + 1j * rng.standard_normal(M) for s in layout.streams}
    total = sum(np.vdot(v, v).real for v in raw.values())
    scale = math.sqrt(P / total)
    return {k: scale * v for k, v in raw.items()}


def test_criterion_3_exact_reductions():
    t0 = time.time()
    rng = trial_rng(300)
    n = 1000
    K, M, P = 4, 4, 10.0
    cfg = SystemConfig.create(M, K, P)
    lay_rs = build_stream_layout(Scheme.ONE_LAYER_RS, K)
    lay_sdma = build_stream_layout(Scheme.SDMA, K)
    lay_hrs = build_stream_layout(Scheme.TWO_LAYER_HRS, K, grouping=[[1, 2], [3, 4]])
    cfg2 = SystemConfig.create(2, 2, P)
    lay_rs2 = build_stream_layout(Scheme.ONE_LAYER_RS, 2)
    lay_grs2 = build_stream_layout(Scheme.GENERALIZED_RS, 2)
    worst = 0.0
    for i in range(n):
        H = rng.standard_normal((M, K)) + 1j * rng.standard_normal((M, K))
        # SDMA == 1-layer RS with zero common power
        pre = _random_solution(lay_sdma, M, P, rng)
        rep_sdma = rate_downlink(lay_sdma, PrecoderSolution(precoders=pre), H, cfg)
        pre_rs = dict(pre)
        pre_rs["c"] = np.zeros(M, dtype=complex)
        rep_rs = rate_downlink(lay_rs, PrecoderSolution(precoders=pre_rs), H, cfg)
        worst = max(worst, max(abs(rep_rs.totals[k] - rep_sdma.totals[k]) for k in rep_sdma.totals))
        # 2-layer HRS with zero inner-group power == 1-layer RS
        pre = _random_solution(lay_rs, M, P, rng)
        rep_rs1 = rate_downlink(lay_rs, PrecoderSolution(precoders=pre), H, cfg)
        pre_hrs = dict(pre)
        pre_hrs["g1"] = np.zeros(M, dtype=complex)
        pre_hrs["g2"] = np.zeros(M, dtype=complex)
        rep_hrs = rate_downlink(lay_hrs, PrecoderSolution(precoders=pre_hrs), H, cfg)
        worst = max(worst, max(abs(rep_hrs.totals[k] - rep_rs1.totals[k]) for k in rep_rs1.totals))
        # generalized RS at K=2 == 1-layer RS, identical arithmetic
        H2 = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        pre2 = _random_solution(lay_rs2, 2, P, rng)
        rep_a = rate_downlink(lay_rs2, PrecoderSolution(precoders=pre2), H2, cfg2)
        rep_b = rate_downlink(
            lay_grs2,
            PrecoderSolution(
                precoders={"s12": pre2["c"], "s1": pre2["p1"], "s2": pre2["p2"]}
            ),
            H2,
            cfg2,
        )
        worst = max(worst, max(abs(rep_a.totals[k] - rep_b.totals[k]) for k in rep_a.totals))
    ok = worst <= 1e-12
    _report(3, ok, f"max reduction mismatch {worst:.2e} over {n} instances each", time.time() - t0, 120.0)


# -- criterion 4: superset property ---------------------------------------------


def test_criterion_4_superset():
    t0 = time.time()
    P = 100.0
    cfg = SystemConfig.create(2, 2, P)
    lay_rs = build_stream_layout(Scheme.ONE_LAYER_RS, 2)
    lay_sdma = build_stream_layout(Scheme.SDMA, 2)
    spec_ch = ChannelEnsembleSpec.uniform(2, base_seed=400)
    wins = 0
    trials = 100
    for t in range(trials):
        H = sample_rayleigh(spec_ch, 2, 2, t)
        wsr_rs = solve(lay_rs, cfg, H).objective
        wsr_sdma = solve(lay_sdma, cfg, H).objective
        wsr_noma = solve_noma_best(cfg, H).objective
        wsr_oma = oma_best_wsr(cfg, H)
        if wsr_rs >= max(wsr_sdma, wsr_noma, wsr_oma) - 1e-3:
            wins += 1
    ok = wins >= 98
    _report(4, ok, f"RSMA within 1e-3 of best baseline in {wins}/{trials} trials (need >=98)", time.time() - t0, 600.0)


# -- criterion 5: uplink MAC ------------------------------------------------------


def test_criterion_5_uplink():
    t0 = time.time()
    rng = trial_rng(500)
    worst = 0.0
    H = None
    for i in range(10_000):
        h1, h2 = rng.uniform(0.2, 2.0), rng.uniform(0.2, 2.0)
        p1, p2 = rng.uniform(0.1, 2.0), rng.uniform(0.1, 2.0)
        b1, b2 = rng.uniform(0, 1), rng.uniform(0, 1)
        powers = {
            (1, 1): p1 * b1,
            (1, 2): p1 * (1 - b1),
            (2, 1): p2 * b2,
            (2, 2): p2 * (1 - b2),
        }
        keys = [k for k in powers if powers[k] > 0]
        order = [keys[j] for j in rng.permutation(len(keys))]
        H = np.array([[h1, h2]], dtype=complex)
        rep = rate_uplink(powers, order, H, 1.0)
        total = sum(rep.stream_rate.values())
        expected = math.log2(1.0 + p1 * h1**2 + p2 * h2**2)
        worst = max(worst, abs(total - expected))
    telescoping_ok = worst <= 1e-12

    # 20 evenly spaced dominant-face points, symmetric unit setup
    res = run_experiment("uplink-region", {"n_face": 20})
    rows = [r for r in res.rows() if r["point_type"] == "face"]
    sum_cap = uplink_sum_capacity((1.0, 1.0), np.array([[1.0, 1.0]], dtype=complex), 1.0)
    r2_lo, r2_hi = math.log2(1.5), 1.0
    face_err = 0.0
    for i, row in enumerate(rows):
        target_r2 = r2_lo + (r2_hi - r2_lo) * i / 19
        target_r1 = sum_cap - target_r2
        face_err = max(face_err, abs(row["R1"] - target_r1), abs(row["R2"] - target_r2))
    face_ok = len(rows) == 20 and face_err <= 1e-6
    ok = telescoping_ok and face_ok
    _report(
        5,
        ok,
        f"telescoping max err {worst:.2e} over 1e4 draws; face max err {face_err:.2e} over 20 points",
        time.time() - t0,
        10.0,
    )


# -- criterion 6: operational-region structure -----------------------------------


def test_criterion_6_operational_regions():
    t0 = time.time()
    eq = run_experiment("oper-region", {"grid": 10, "weights": (1.0, 1.0), "restarts": 3})
    eq_labels = {(round(r["rho"], 3), round(r["gamma_db"], 1)): r["label"] for r in eq.rows()}
    rhos = sorted({k[0] for k in eq_labels})
    gammas = sorted({k[1] for k in eq_labels})
    noma_eq = sum(1 for v in eq_labels.values() if v == "noma")
    frac = [np.mean([eq_labels[(r, g)] == "sdma" for g in gammas]) for r in rhos]
    sdma_monotone = all(b >= a for a, b in zip(frac, frac[1:]))

    wt = run_experiment("oper-region", {"grid": 10, "weights": (1.0, 10**0.5), "restarts": 3})
    wt_labels = {(round(r["rho"], 3), round(r["gamma_db"], 1)): r["label"] for r in wt.rows()}
    noma_cells = [k for k, v in wt_labels.items() if v == "noma"]
    noma_appears = len(noma_cells) > 0
    # NOMA confined to the small-rho / large-disparity wedge: never with both
    # well-separated channels and similar strengths, and per-gamma occupies a
    # rho-prefix of the grid
    wedge_ok = all(not (rho >= 0.5 and gdb >= -10.0) for rho, gdb in noma_cells)
    prefix_ok = True
    for g in gammas:
        flags = [wt_labels[(r, g)] == "noma" for r in rhos]
        if any(flags):
            last = max(i for i, f in enumerate(flags) if f)
            prefix_ok &= all(flags[: last + 1])
    ok = noma_eq == 0 and sdma_monotone and noma_appears and wedge_ok and prefix_ok
    _report(
        6,
        ok,
        f"equal weights: {noma_eq} NOMA cells, sdma fraction monotone={sdma_monotone}; "
        f"weighted: {len(noma_cells)} NOMA cells in wedge={wedge_ok}, prefix={prefix_ok}",
        time.time() - t0,
        1800.0,
    )


# -- criterion 7: MMF and common-power behavior -----------------------------------


def test_criterion_7_mmf_and_common_power():
    t0 = time.time()
    res = run_experiment(
        "mmf-vs-snr",
        {"m": 4, "k": 4, "alpha": 0.5, "trials": 50, "seed": 0, "m_samples": 8, "restarts": 2},
    )
    detail = res.rows("mmf-vs-snr-trials")
    by = {}
    for r in detail:
        by.setdefault((r["snr_db"], r["trial"]), {})[r["scheme"]] = r["mmf_rate"]
    total = len(by)
    wins_sdma = sum(1 for v in by.values() if v["rsma"] >= v["sdma"] - 1e-9)
    wins_noma = sum(1 for v in by.values() if v["rsma"] >= v["noma"] - 1e-9)
    summary = {(r["snr_db"], r["scheme"]): r for r in res.rows()}
    pcs = [(summary[(s, "rsma")]["pc_fraction"], summary[(s, "rsma")]["pc_stderr"]) for s in (10.0, 20.0, 30.0)]
    pc_monotone = all(
        pcs[i + 1][0] >= pcs[i][0] - max(pcs[i][1], pcs[i + 1][1]) for i in range(2)
    )
    ok = wins_sdma >= 0.9 * total and wins_noma >= 0.9 * total and pc_monotone
    _report(
        7,
        ok,
        f"RSMA>=SDMA {wins_sdma}/{total}, RSMA>=NOMA {wins_noma}/{total} (need 90%); "
        f"Pc/P {[round(p, 3) for p, _ in pcs]} nondecreasing within 1 SE: {pc_monotone}",
        time.time() - t0,
        1800.0,
    )


# -- criterion 8: overloaded QoS slopes --------------------------------------------


def test_criterion_8_overloaded_qos():
    t0 = time.time()
    res = run_experiment("overloaded-qos", {"m": 2, "k": 4, "trials": 10, "seed": 0, "restarts": 3})
    slopes = {r["scheme"]: r["slope"] for r in res.rows("overloaded-qos-summary")}
    feas = {
        (r["scheme"], r["snr_db"]): r["feasible_trials"] for r in res.rows()
    }
    ok = slopes["rsma"] >= 1.7 and slopes["sdma"] <= 1.3
    _report(
        8,
        ok,
        f"rsma slope {slopes['rsma']:.3f} (need >=1.7), sdma {slopes['sdma']:.3f} (need <=1.3); "
        f"feasible trials at 30 dB: rsma {feas[('rsma', 30.0)]}/10, sdma {feas[('sdma', 30.0)]}/10",
        time.time() - t0,
        1200.0,
    )


# -- criterion 9: brute-force oracle equivalence ------------------------------------


def _grid_best_wsr(H, P):
    """Dense 1e6-point angle/power grid over structured precoder families."""
    h1 = H[:, 0] / np.linalg.norm(H[:, 0])
    h2 = H[:, 1] / np.linalg.norm(H[:, 1])
    zf = zf_directions(H)
    n_l, n_nu, n_ph, n_tau, n_beta = 10, 10, 8, 25, 5
    l = np.linspace(0, 1, n_l)
    D1 = l[:, None] * h1[None, :] + (1 - l)[:, None] * zf[:, 0][None, :]
    D1 /= np.linalg.norm(D1, axis=1, keepdims=True)
    D2 = l[:, None] * h2[None, :] + (1 - l)[:, None] * zf[:, 1][None, :]
    D2 /= np.linalg.norm(D2, axis=1, keepdims=True)
    nu = np.linspace(0, 1, n_nu)
    ph = np.linspace(0, 2 * np.pi, n_ph, endpoint=False)
    DC = (
        nu[:, None, None] * h1[None, None, :]
        + (1 - nu)[:, None, None] * np.exp(1j * ph)[None, :, None] * h2[None, None, :]
    ).reshape(-1, 2)
    norms = np.linalg.norm(DC, axis=1)
    DC = DC[norms > 1e-9] / norms[norms > 1e-9, None]
    a1 = np.abs(np.conj(H[:, 0]) @ D1.T) ** 2
    b1 = np.abs(np.conj(H[:, 1]) @ D1.T) ** 2
    a2 = np.abs(np.conj(H[:, 0]) @ D2.T) ** 2
    b2 = np.abs(np.conj(H[:, 1]) @ D2.T) ** 2
    c1 = np.abs(np.conj(H[:, 0]) @ DC.T) ** 2
    c2 = np.abs(np.conj(H[:, 1]) @ DC.T) ** 2
    tau = np.linspace(0, 1, n_tau)
    beta = np.linspace(0.05, 0.95, n_beta)
    q1 = P * tau[:, None] * beta[None, :]
    q2 = P * tau[:, None] * (1 - beta)[None, :]
    pc = P * (1 - tau)
    best = 0.0
    for i in range(n_l):
        for j in range(n_l):
            s1u1 = a1[i] * q1
            s2u1 = a2[j] * q2
            s1u2 = b1[i] * q1
            s2u2 = b2[j] * q2
            den1 = 1.0 + s1u1 + s2u1
            den2 = 1.0 + s1u2 + s2u2
            Rc1 = np.log2(1 + pc[None, :, None] * c1[:, None, None] / den1[None])
            Rc2 = np.log2(1 + pc[None, :, None] * c2[:, None, None] / den2[None])
            Rc = np.minimum(Rc1, Rc2)
            R1 = np.log2(1 + s1u1 / (1.0 + s2u1))
            R2 = np.log2(1 + s2u2 / (1.0 + s1u2))
            best = max(best, float((Rc + R1[None] + R2[None]).max()))
    return best


def test_criterion_9_brute_force_oracle():
    t0 = time.time()
    P = 100.0
    cfg = SystemConfig.create(2, 2, P)
    lay = build_stream_layout(Scheme.ONE_LAYER_RS, 2)
    spec_ch = ChannelEnsembleSpec.uniform(2, base_seed=900)
    worst_ratio = math.inf
    for t in range(20):
        H = sample_rayleigh(spec_ch, 2, 2, t)
        obj = solve(lay, cfg, H).objective
        grid = _grid_best_wsr(H, P)
        worst_ratio = min(worst_ratio, obj / grid)
    ok = worst_ratio >= 0.99
    _report(9, ok, f"worst solver/grid ratio {worst_ratio:.4f} over 20 instances (need >=0.99)", time.time() - t0, 600.0)


# -- criterion 10: literal SINR recomputation ----------------------------------------


def _literal_rates(layout, precoders, H_cols, noise_var, K):
    """Independent recomputation in plain Python: no engine helpers, no numpy."""
    decode = {}
    stream = {}
    for k in range(1, K + 1):
        h = H_cols[k - 1]
        cancelled = []
        for lab in layout.decode_order[k]:
            sig_amp = sum(h[m].conjugate() * precoders[lab][m] for m in range(len(h)))
            sig = abs(sig_amp) ** 2
            interf = 0.0
            for other in layout.labels:
                if other == lab or other in cancelled:
                    continue
                amp = sum(h[m].conjugate() * precoders[other][m] for m in range(len(h)))
                interf += abs(amp) ** 2
            decode[(lab, k)] = math.log2(1.0 + sig / (interf + noise_var[k - 1]))
            cancelled.append(lab)
    for s in layout.streams:
        stream[s.label] = min(decode[(s.label, k)] for k in sorted(s.users))
    totals = {k: 0.0 for k in range(1, K + 1)}
    for s in layout.streams:
        owners = sorted(s.owners)
        if len(owners) == 1:
            totals[owners[0]] += stream[s.label]
        else:
            for k in owners:
                totals[k] += stream[s.label] / len(owners)
    return decode, stream, totals


def test_criterion_10_literal_recomputation():
    t0 = time.time()
    rng = trial_rng(1000)
    P = 8.0
    worst = 0.0
    cases = []
    cases.append((build_stream_layout(Scheme.ONE_LAYER_RS, 3), 3, 3))
    cases.append((build_stream_layout(Scheme.TWO_LAYER_HRS, 4, grouping=[[1, 2], [3, 4]]), 4, 4))
    cases.append((build_stream_layout(Scheme.GENERALIZED_RS, 3), 3, 3))
    cases.append((build_stream_layout(Scheme.RS_CMD, 3), 3, 3))
    cases.append((build_stream_layout(Scheme.SDMA, 3), 3, 3))
    cases.append((build_stream_layout(Scheme.NOMA, 3, orders=(2, 1, 3)), 3, 3))
    cases.append((build_stream_layout(Scheme.OMA, 3), 3, 3))
    cases.append((build_stream_layout(Scheme.MULTICAST, 3), 3, 3))
    for layout, M, K in cases:
        cfg = SystemConfig.create(M, K, P, noise_var=tuple(0.5 + 0.25 * k for k in range(K)))
        for _ in range(100):
            H = rng.standard_normal((M, K)) + 1j * rng.standard_normal((M, K))
            pre = _random_solution(layout, M, P, rng)
            rep = rate_downlink(layout, PrecoderSolution(precoders=pre), H, cfg)
            H_cols = [[complex(H[m, k]) for m in range(M)] for k in range(K)]
            pre_lists = {lab: [complex(x) for x in v] for lab, v in pre.items()}
            decode, stream, totals = _literal_rates(layout, pre_lists, H_cols, cfg.noise_var, K)
            for key, val in decode.items():
                worst = max(worst, abs(rep.per_user_decode_rate[key] - val))
            for lab, val in stream.items():
                worst = max(worst, abs(rep.stream_rate[lab] - val))
            for k, val in totals.items():
                worst = max(worst, abs(rep.totals[k] - val))
    ok = worst <= 1e-10
    _report(10, ok, f"max mismatch {worst:.2e} over 100 instances x 8 schemes", time.time() - t0, 300.0)
