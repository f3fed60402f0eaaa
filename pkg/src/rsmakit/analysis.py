"""Degrees-of-freedom formulas, slope estimation, operational regions, experiments.

The DoF values follow the piecewise closed forms for NOMA (SC-SIC per
group), SDMA (MU-LP), and RSMA (1-layer RS) under perfect and imperfect
CSIT with scaling factor alpha.  Experiment drivers reproduce the paper's
desk-scale studies and emit deterministic CSV rows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .channels import (
    ChannelEnsembleSpec,
    ChannelSampler,
    ScaledError,
    deterministic_two_user,
    sample_rayleigh,
    theta_from_rho,
)
from .model import PrecoderSolution, Scheme, SystemConfig, build_stream_layout, noma_order_from_channel
from .optimizer import (
    ErgodicSaa,
    OptimizeSpec,
    PerfectCsit,
    oma_best_wsr,
    solve,
    solve_mmf,
    solve_noma_best,
)
from .precoders import PowerSplit, assemble_solution, optimize_tau, random_common, zf_directions
from .rates import rate_downlink, rate_uplink, uplink_sum_capacity

__all__ = [
    "DoFQuery",
    "RegionCell",
    "dof_closed_form",
    "empirical_dof",
    "classify_operational_region",
    "run_experiment",
    "RECIPES",
    "RecipeResult",
]


# -- closed-form DoF -----------------------------------------------------------


@dataclass(frozen=True)
class DoFQuery:
    scheme: str  # "noma" | "sdma" | "rsma"
    metric: str  # "sum" | "mmf"
    csit: str  # "perfect" | "imperfect"
    M: int
    K: int
    G: int = 1
    g: int | None = None
    alpha: Fraction | float = 1

    def __post_init__(self):
        if self.scheme not in ("noma", "sdma", "rsma"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.metric not in ("sum", "mmf"):
            raise ValueError(f"unknown metric {self.metric!r}")
        if self.csit not in ("perfect", "imperfect"):
            raise ValueError(f"unknown csit {self.csit!r}")
        if self.M < 1 or self.K < 1:
            raise ValueError("M and K must be >= 1")
        g = self.K // self.G if self.g is None else self.g
        if not 1 <= g <= self.K:
            raise ValueError("group size must satisfy 1 <= g <= K")
        if self.G * g != self.K:
            raise ValueError(f"inconsistent grouping: G={self.G}, g={g}, K={self.K}")
        a = Fraction(self.alpha).limit_denominator(10**6)
        if not 0 <= a <= 1:
            raise ValueError("alpha must lie in [0, 1]")

    @property
    def group_size(self) -> int:
        return self.K // self.G if self.g is None else self.g


def dof_closed_form(q: DoFQuery) -> Fraction:
    """Exact sum-DoF or MMF-DoF of a scheme as a rational number."""
    a = Fraction(q.alpha).limit_denominator(10**6)
    M, K, G, g = q.M, q.K, q.G, q.group_size
    perfect = q.csit == "perfect"
    if q.scheme == "noma":
        if q.metric == "sum":
            base = min(M, G)
            return Fraction(base) if perfect else max(Fraction(1), base * a)
        if perfect:
            return Fraction(1, g) if M >= K - g + 1 else Fraction(0)
        if G == 1:
            return Fraction(1, K)
        return a / g if M >= K - g + 1 else Fraction(0)
    if q.scheme == "sdma":
        if q.metric == "sum":
            base = min(M, K)
            return Fraction(base) if perfect else max(Fraction(1), base * a)
        if perfect:
            return Fraction(1) if M >= K else Fraction(0)
        return a if M >= K else Fraction(0)
    # rsma (1-layer RS)
    if q.metric == "sum":
        base = min(M, K)
        return Fraction(base) if perfect else 1 + (base - 1) * a
    if perfect:
        return Fraction(1) if M >= K else Fraction(1, 1 + K - M)
    if M >= K:
        return (1 + (K - 1) * a) / K
    ceiling = Fraction(1, 1 + K - M)
    if a <= ceiling:
        return (1 + (M - 1) * a) / K
    return ceiling


def empirical_dof(
    rates: Sequence[float], p_values: Sequence[float], top: int = 3
) -> tuple[float, float]:
    """Least-squares high-SNR slope of rate versus log2(P).

    Uses the ``top`` highest-power points; requires at least 3 points
    spanning 10 dB at the high end.  Returns (slope, max fit residual).
    """
    if len(rates) != len(p_values):
        raise ValueError("rates and powers must align")
    if len(rates) < 3:
        raise ValueError("need at least 3 SNR points")
    order = np.argsort(p_values)
    p_sorted = np.asarray(p_values, dtype=float)[order]
    r_sorted = np.asarray(rates, dtype=float)[order]
    top = max(3, min(top, len(rates)))
    p_top = p_sorted[-top:]
    r_top = r_sorted[-top:]
    if 10.0 * math.log10(p_top[-1] / p_top[0]) < 10.0 - 1e-9:
        raise ValueError("top points must span at least 10 dB")
    x = np.log2(p_top)
    slope, intercept = np.polyfit(x, r_top, 1)
    residual = float(np.max(np.abs(slope * x + intercept - r_top)))
    return float(slope), residual


# -- operational region ---------------------------------------------------------


@dataclass(frozen=True)
class RegionCell:
    rho: float
    gamma_db: float
    label: str
    wsr_rsma: float
    wsr_sdma: float
    wsr_noma: float
    wsr_oma: float
    epsilon: float


def label_from_rules(
    wsr_rsma: float, wsr_sdma: float, wsr_noma: float, wsr_oma: float, eps: float
) -> str:
    """Scheme-selection rules applied in order: OMA, SDMA, NOMA, else RSMA."""
    if wsr_rsma - wsr_oma < eps:
        return "oma"
    if wsr_sdma - wsr_oma > eps and wsr_rsma - wsr_sdma < eps:
        return "sdma"
    if wsr_noma - wsr_sdma > eps and wsr_rsma - wsr_noma < eps:
        return "noma"
    return "rsma"


def classify_operational_region(
    rho_grid: Sequence[float],
    gamma_db_grid: Sequence[float],
    weights: Sequence[float],
    epsilon: float = 0.1,
    snr_db: float = 20.0,
    spec: OptimizeSpec | None = None,
) -> list[RegionCell]:
    """Preferred-scheme map over the two-user deterministic channel grid.

    For each (rho, gamma_dB) cell the channel angle is recovered from rho,
    all four schemes' WSRs are optimized, and the selection rules pick the
    label.  epsilon is recorded in every cell.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be > 0")
    P = 10.0 ** (snr_db / 10.0)
    cells = []
    for rho in rho_grid:
        theta = theta_from_rho(rho)
        for gamma_db in gamma_db_grid:
            H, rho_check = deterministic_two_user(gamma_db, theta)
            cfg = SystemConfig.create(M=2, K=2, P=P, weights=tuple(weights))
            lay_rs = build_stream_layout(Scheme.ONE_LAYER_RS, 2)
            lay_sdma = build_stream_layout(Scheme.SDMA, 2)
            wsr_rsma = solve(lay_rs, cfg, H, spec).objective
            wsr_sdma = solve(lay_sdma, cfg, H, spec).objective
            wsr_noma = solve_noma_best(cfg, H, spec).objective
            wsr_oma = oma_best_wsr(cfg, H)
            wsr_rsma = max(wsr_rsma, wsr_sdma, wsr_noma, wsr_oma)  # superset by definition
            cells.append(
                RegionCell(
                    rho=float(rho_check),
                    gamma_db=float(gamma_db),
                    label=label_from_rules(wsr_rsma, wsr_sdma, wsr_noma, wsr_oma, epsilon),
                    wsr_rsma=wsr_rsma,
                    wsr_sdma=wsr_sdma,
                    wsr_noma=wsr_noma,
                    wsr_oma=wsr_oma,
                    epsilon=epsilon,
                )
            )
    return cells


# -- experiment recipes ----------------------------------------------------------


@dataclass
class RecipeResult:
    recipe: str
    tables: dict[str, tuple[list[str], list[dict]]]  # name -> (fieldnames, rows)

    def rows(self, name: str | None = None) -> list[dict]:
        key = name or self.recipe
        return self.tables[key][1]


def _solver_spec(params: Mapping, csit=None) -> OptimizeSpec:
    return OptimizeSpec(
        csit=csit or PerfectCsit(),
        tol=float(params.get("tol", 1e-4)),
        max_iters=int(params.get("max_iters", 200)),
        restarts=int(params.get("restarts", 3)),
        seed=int(params.get("seed", 0)),
    )


def _scaled_sampler(params: Mapping, M: int, K: int, P: float, alpha: float, seed: int) -> ChannelSampler:
    sigma2 = params.get("sigma2", 1.0)
    spec = (
        ChannelEnsembleSpec.uniform(K, sigma2, base_seed=seed)
        if np.isscalar(sigma2)
        else ChannelEnsembleSpec(tuple(float(s) for s in sigma2), base_seed=seed)
    )
    return ChannelSampler(spec, M, K, ScaledError(alpha=alpha, p_ref=P))


def _recipe_rate_region(params: Mapping) -> RecipeResult:
    """Two-user rate-region boundary sweep for every scheme."""
    snr_db = float(params.get("snr_db", 20.0))
    P = 10.0 ** (snr_db / 10.0)
    n_weights = int(params.get("n_weights", 10))
    seed = int(params.get("seed", 0))
    alpha = params.get("alpha")
    trials = int(params.get("trials", 1))
    schemes = params.get("schemes", ("rsma", "sdma", "noma", "oma"))
    ratios = np.logspace(-1.5, 1.5, n_weights)
    rows = []
    for trial in range(trials):
        if alpha is None:
            spec_ch = ChannelEnsembleSpec.uniform(2, base_seed=seed)
            H_hat = sample_rayleigh(spec_ch, 2, 2, trial)
            csit = PerfectCsit()
        else:
            sampler = _scaled_sampler(params, 2, 2, P, float(alpha), seed)
            pair = sampler.pair(trial)
            H_hat = pair.H_hat
            csit = ErgodicSaa(sampler=sampler, m_samples=int(params.get("m_samples", 8)))
        for ratio in ratios:
            w = (1.0, float(ratio))
            cfg = SystemConfig.create(2, 2, P, weights=w)
            sspec = _solver_spec(params, csit)
            for scheme in schemes:
                if scheme == "rsma":
                    res = solve(build_stream_layout(Scheme.ONE_LAYER_RS, 2), cfg, H_hat, sspec)
                elif scheme == "sdma":
                    res = solve(build_stream_layout(Scheme.SDMA, 2), cfg, H_hat, sspec)
                elif scheme == "noma":
                    res = solve_noma_best(cfg, H_hat, sspec)
                elif scheme == "oma":
                    res = None
                else:
                    raise ValueError(f"unknown scheme {scheme!r}")
                if res is None:
                    # best single-user vertex under these weights
                    r1 = math.log2(1 + P * float(np.vdot(H_hat[:, 0], H_hat[:, 0]).real))
                    r2 = math.log2(1 + P * float(np.vdot(H_hat[:, 1], H_hat[:, 1]).real))
                    pick1 = w[0] * r1 >= w[1] * r2
                    rates = (r1, 0.0) if pick1 else (0.0, r2)
                    conv = True
                else:
                    rates = res.totals
                    conv = res.converged
                rows.append(
                    {
                        "trial": trial,
                        "weight1": w[0],
                        "weight2": w[1],
                        "scheme": scheme,
                        "R1": rates[0],
                        "R2": rates[1],
                        "converged": conv,
                    }
                )
    fields = ["trial", "weight1", "weight2", "scheme", "R1", "R2", "converged"]
    return RecipeResult("rate-region", {"rate-region": (fields, rows)})


def _recipe_esr_vs_alpha(params: Mapping) -> RecipeResult:
    """Ergodic sum rate of RS and baselines versus CSIT quality.

    By default the reported ESR is the solver's sample-average objective
    (in-sample, identically paired between schemes, so the RS-over-SDMA
    ordering is exact up to solver tolerance).  Set ``eval_samples`` to a
    positive count for an additional out-of-sample evaluation over fresh
    conditional draws.
    """
    M = int(params.get("m", 2))
    K = int(params.get("k", 3))
    snr_db = float(params.get("snr_db", 20.0))
    P = 10.0 ** (snr_db / 10.0)
    alphas = params.get("alpha_grid", (0.2, 0.5, 0.8))
    trials = int(params.get("trials", 5))
    n_eval = int(params.get("eval_samples", 0))
    seed = int(params.get("seed", 0))
    schemes = params.get("schemes", ("rsma", "sdma"))
    rows = []
    for alpha in alphas:
        for scheme in schemes:
            esr = []
            esr_fresh = []
            for trial in range(trials):
                sampler = _scaled_sampler(params, M, K, P, float(alpha), seed)
                pair = sampler.pair(trial)
                cfg = SystemConfig.create(M, K, P)
                sspec = _solver_spec(params, ErgodicSaa(sampler, int(params.get("m_samples", 8))))
                if scheme == "rsma":
                    lay = build_stream_layout(Scheme.ONE_LAYER_RS, K)
                elif scheme == "sdma":
                    lay = build_stream_layout(Scheme.SDMA, K)
                else:
                    raise ValueError(f"unknown scheme {scheme!r}")
                res = solve(lay, cfg, pair.H_hat, sspec)
                esr.append(res.objective)
                if n_eval > 0:
                    vals = []
                    for j in range(n_eval):
                        H_true = sampler.conditional(pair.H_hat, 10_000 + trial * n_eval + j)
                        vals.append(rate_downlink(lay, res.solution, H_true, cfg).sum_rate)
                    esr_fresh.append(float(np.mean(vals)))
            row = {
                "alpha": float(alpha),
                "scheme": scheme,
                "esr": float(np.mean(esr)),
                "stderr": float(np.std(esr, ddof=1) / math.sqrt(len(esr))) if len(esr) > 1 else 0.0,
                "esr_holdout": float(np.mean(esr_fresh)) if esr_fresh else "",
                "trials": trials,
            }
            rows.append(row)
    fields = ["alpha", "scheme", "esr", "stderr", "esr_holdout", "trials"]
    return RecipeResult("esr-vs-alpha", {"esr-vs-alpha": (fields, rows)})


def _noma_closed_form_mmf(cfg: SystemConfig, H_hat: np.ndarray):
    """Closed-form NOMA baseline: matched directions, scalar power-profile search.

    Powers follow a geometric profile over the SIC order (weaker positions
    get more power for larger exponents); the profile exponent is picked by
    a deterministic scalar grid on the max-min rate.  Returns (solution,
    layout).
    """
    order = noma_order_from_channel(H_hat)
    layout = build_stream_layout(Scheme.NOMA, cfg.K, orders=order)
    dirs = {}
    owner_of = {}
    for s in layout.streams:
        (owner,) = s.owners
        owner_of[s.label] = owner
        h = H_hat[:, owner - 1]
        dirs[s.label] = h / np.linalg.norm(h)
    pos = {u: i for i, u in enumerate(order)}  # 0 = strongest
    best = None
    for r in np.geomspace(0.2, 8.0, 25):
        shares = np.array([r ** pos[owner_of[s.label]] for s in layout.streams])
        shares = shares / shares.sum() * cfg.P
        precoders = {
            s.label: math.sqrt(shares[i]) * dirs[s.label] for i, s in enumerate(layout.streams)
        }
        sol = PrecoderSolution(precoders=precoders)
        rep = rate_downlink(layout, sol, H_hat, cfg)
        if best is None or rep.min_rate > best[0]:
            best = (rep.min_rate, sol, layout)
    return best[1], best[2]


def _recipe_mmf_vs_snr(params: Mapping) -> RecipeResult:
    """Max-min rate and common-power fraction versus SNR under imperfect CSIT."""
    M = int(params.get("m", 4))
    K = int(params.get("k", 4))
    alpha = float(params.get("alpha", 0.5))
    snrs = params.get("snr_grid", (10.0, 20.0, 30.0))
    trials = int(params.get("trials", 50))
    seed = int(params.get("seed", 0))
    schemes = params.get("schemes", ("rsma", "sdma", "noma"))
    rows = []
    per_trial = {(s, snr): [] for s in schemes for snr in snrs}
    pc_frac = {snr: [] for snr in snrs}
    for snr_db in snrs:
        P = 10.0 ** (snr_db / 10.0)
        for trial in range(trials):
            sampler = _scaled_sampler(params, M, K, P, alpha, seed)
            pair = sampler.pair(trial)
            cfg = SystemConfig.create(M, K, P)
            sspec = _solver_spec(params, ErgodicSaa(sampler, int(params.get("m_samples", 8))))
            for scheme in schemes:
                if scheme == "rsma":
                    res = solve_mmf(build_stream_layout(Scheme.ONE_LAYER_RS, K), cfg, pair.H_hat, sspec)
                    val = res.objective
                    pc = res.constraints.get("common_power", 0.0)
                    pc_frac[snr_db].append(pc / P)
                elif scheme == "sdma":
                    res = solve_mmf(build_stream_layout(Scheme.SDMA, K), cfg, pair.H_hat, sspec)
                    val = res.objective
                elif scheme == "noma":
                    sol, lay = _noma_closed_form_mmf(cfg, pair.H_hat)
                    # same SAA evaluation as the solver objective
                    vals = []
                    for j in range(int(params.get("m_samples", 8))):
                        H_true = sampler.conditional(pair.H_hat, j)
                        vals.append(rate_downlink(lay, sol, H_true, cfg, alloc_policy="maxmin").min_rate)
                    val = float(np.mean(vals))
                else:
                    raise ValueError(f"unknown scheme {scheme!r}")
                per_trial[(scheme, snr_db)].append(val)
    for snr_db in snrs:
        for scheme in schemes:
            vals = per_trial[(scheme, snr_db)]
            row = {
                "snr_db": snr_db,
                "scheme": scheme,
                "mmf_rate": float(np.mean(vals)),
                "stderr": float(np.std(vals, ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0,
                "pc_fraction": float(np.mean(pc_frac[snr_db])) if scheme == "rsma" else "",
                "pc_stderr": (
                    float(np.std(pc_frac[snr_db], ddof=1) / math.sqrt(len(pc_frac[snr_db])))
                    if scheme == "rsma" and len(pc_frac[snr_db]) > 1
                    else ""
                ),
                "trials": trials,
            }
            rows.append(row)
    fields = ["snr_db", "scheme", "mmf_rate", "stderr", "pc_fraction", "pc_stderr", "trials"]
    detail_rows = [
        {"snr_db": snr, "scheme": s, "trial": i, "mmf_rate": v}
        for (s, snr), vals in sorted(per_trial.items())
        for i, v in enumerate(vals)
    ]
    return RecipeResult(
        "mmf-vs-snr",
        {
            "mmf-vs-snr": (fields, rows),
            "mmf-vs-snr-trials": (["snr_db", "scheme", "trial", "mmf_rate"], detail_rows),
        },
    )


def _zf_or_basis(H_hat: np.ndarray, M: int, K: int) -> np.ndarray:
    """ZF directions; orthonormal basis columns when the estimate carries no rank.

    A rank-deficient estimate (e.g. the zero estimate at the alpha-scaled
    error's low-power end) leaves the transmitter without usable CSIT, in
    which case fixed orthonormal directions are the conventional stand-in.
    """
    try:
        return zf_directions(H_hat)
    except np.linalg.LinAlgError:
        basis = np.zeros((M, K), dtype=complex)
        for k in range(K):
            basis[k % M, k] = 1.0
        return basis


def _rsma_closed_form_sum_rate(
    cfg: SystemConfig, sampler: ChannelSampler, H_hat: np.ndarray, trial: int, m_samples: int
) -> float:
    """ZF private + fixed random common + scalar power-split search, SAA objective."""
    K = cfg.K
    layout = build_stream_layout(Scheme.ONE_LAYER_RS, K)
    zf = _zf_or_basis(H_hat, cfg.M, K)
    dirs = {"c": random_common(cfg.M)}
    for k in range(1, K + 1):
        dirs[f"p{k}"] = zf[:, k - 1]
    draws = [sampler.conditional(H_hat, 500 + trial * m_samples + j) for j in range(m_samples)]

    def objective(sol) -> float:
        return float(np.mean([rate_downlink(layout, sol, H, cfg).sum_rate for H in draws]))

    _, val = optimize_tau(layout, dirs, H_hat, cfg, objective_fn=objective)
    return val


def _zf_sdma_sum_rate(
    cfg: SystemConfig, sampler: ChannelSampler, H_hat: np.ndarray, trial: int, m_samples: int
) -> float:
    layout = build_stream_layout(Scheme.SDMA, cfg.K)
    zf = _zf_or_basis(H_hat, cfg.M, cfg.K)
    dirs = {f"p{k}": zf[:, k - 1] for k in range(1, cfg.K + 1)}
    sol = assemble_solution(layout, dirs, PowerSplit(1.0), cfg)
    draws = [sampler.conditional(H_hat, 500 + trial * m_samples + j) for j in range(m_samples)]
    return float(np.mean([rate_downlink(layout, sol, H, cfg).sum_rate for H in draws]))


def _recipe_dof_slope(params: Mapping) -> RecipeResult:
    """Empirical high-SNR slopes of RSMA (closed-form) and ZF-SDMA under scaled CSIT error."""
    M = int(params.get("m", 2))
    K = int(params.get("k", 2))
    alpha = float(params.get("alpha", 0.6))
    snrs = params.get("snr_grid", (0.0, 10.0, 20.0, 30.0, 40.0))
    trials = int(params.get("trials", 100))
    m_samples = int(params.get("m_samples", 8))
    seed = int(params.get("seed", 0))
    schemes = params.get("schemes", ("rsma", "zf-sdma"))
    rows = []
    slopes = []
    mean_rates: dict[str, list[float]] = {s: [] for s in schemes}
    for snr_db in snrs:
        P = 10.0 ** (snr_db / 10.0)
        cfg = SystemConfig.create(M, K, P)
        per_scheme = {s: [] for s in schemes}
        for trial in range(trials):
            sampler = _scaled_sampler(params, M, K, P, alpha, seed)
            pair = sampler.pair(trial)
            for scheme in schemes:
                if scheme == "rsma":
                    val = _rsma_closed_form_sum_rate(cfg, sampler, pair.H_hat, trial, m_samples)
                elif scheme == "zf-sdma":
                    val = _zf_sdma_sum_rate(cfg, sampler, pair.H_hat, trial, m_samples)
                else:
                    raise ValueError(f"unknown scheme {scheme!r}")
                per_scheme[scheme].append(val)
        for scheme in schemes:
            avg = float(np.mean(per_scheme[scheme]))
            mean_rates[scheme].append(avg)
            rows.append({"scheme": scheme, "snr_db": snr_db, "avg_sum_rate": avg, "trials": trials})
    p_values = [10.0 ** (s / 10.0) for s in snrs]
    for scheme in schemes:
        slope, residual = empirical_dof(mean_rates[scheme], p_values)
        slopes.append({"scheme": scheme, "slope": slope, "residual": residual, "alpha": alpha})
    return RecipeResult(
        "dof-slope",
        {
            "dof-slope": (["scheme", "snr_db", "avg_sum_rate", "trials"], rows),
            "dof-slope-summary": (["scheme", "slope", "residual", "alpha"], slopes),
        },
    )


def _recipe_overloaded_qos(params: Mapping) -> RecipeResult:
    """Overloaded WSR-with-QoS study: rate ladder grows with SNR."""
    M = int(params.get("m", 2))
    K = int(params.get("k", 4))
    snrs = params.get("snr_grid", (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0))
    ladder = params.get("qos_ladder", (0.0, 0.001, 0.004, 0.01, 0.03, 0.06, 0.1))
    if len(ladder) != len(snrs):
        raise ValueError("qos_ladder must have one threshold per SNR point")
    trials = int(params.get("trials", 10))
    seed = int(params.get("seed", 0))
    sigma2 = params.get("sigma2", tuple(1.0 - 0.1 * i for i in range(K)))
    schemes = params.get("schemes", ("rsma", "sdma"))
    spec_ch = ChannelEnsembleSpec(tuple(float(s) for s in sigma2), base_seed=seed)
    rows = []
    trial_rows = []
    mean_rates: dict[str, list[float]] = {s: [] for s in schemes}
    for snr_db, r_th in zip(snrs, ladder):
        P = 10.0 ** (snr_db / 10.0)
        cfg = SystemConfig.create(M, K, P, qos=float(r_th))
        per_scheme = {s: [] for s in schemes}
        feas = {s: 0 for s in schemes}
        for trial in range(trials):
            H = sample_rayleigh(spec_ch, M, K, trial)
            sspec = _solver_spec(params)
            for scheme in schemes:
                lay = build_stream_layout(
                    Scheme.ONE_LAYER_RS if scheme == "rsma" else Scheme.SDMA, K
                )
                res = solve(lay, cfg, H, sspec)
                trial_rows.append(
                    {
                        "snr_db": snr_db,
                        "scheme": scheme,
                        "trial": trial,
                        "feasible": res.feasible,
                        "wsr": res.objective if res.feasible else "",
                    }
                )
                if res.feasible:
                    feas[scheme] += 1
                    per_scheme[scheme].append(res.objective)
        for scheme in schemes:
            avg = float(np.mean(per_scheme[scheme])) if per_scheme[scheme] else 0.0
            mean_rates[scheme].append(avg)
            rows.append(
                {
                    "snr_db": snr_db,
                    "qos": r_th,
                    "scheme": scheme,
                    "avg_wsr": avg,
                    "feasible_trials": feas[scheme],
                    "trials": trials,
                }
            )
    slopes = []
    hi = [s for s in snrs if s >= float(params.get("slope_from_db", 20.0))]
    for scheme in schemes:
        idx = [i for i, s in enumerate(snrs) if s in hi]
        p_values = [10.0 ** (snrs[i] / 10.0) for i in idx]
        r_values = [mean_rates[scheme][i] for i in idx]
        slope, residual = empirical_dof(r_values, p_values, top=len(idx))
        slopes.append({"scheme": scheme, "slope": slope, "residual": residual})
    return RecipeResult(
        "overloaded-qos",
        {
            "overloaded-qos": (
                ["snr_db", "qos", "scheme", "avg_wsr", "feasible_trials", "trials"],
                rows,
            ),
            "overloaded-qos-summary": (["scheme", "slope", "residual"], slopes),
            "overloaded-qos-trials": (
                ["snr_db", "scheme", "trial", "feasible", "wsr"],
                trial_rows,
            ),
        },
    )


def _recipe_uplink_region(params: Mapping) -> RecipeResult:
    """Two-user MAC pentagon: corners plus rate-split points on the dominant face."""
    P1 = float(params.get("p1", 1.0))
    P2 = float(params.get("p2", 1.0))
    h_abs = float(params.get("h_abs", 1.0))
    sigma2 = float(params.get("sigma2", 1.0))
    n_face = int(params.get("n_face", 20))
    H = np.array([[h_abs, h_abs]], dtype=complex)
    g2 = P2 * h_abs**2 / sigma2
    sum_cap = uplink_sum_capacity((P1, P2), H, sigma2)
    rows = []
    # corner A: user 2 decoded first, user 1 clean; corner B the reverse
    rep_a = rate_uplink({(1, 1): P1, (2, 1): P2}, [(2, 1), (1, 1)], H, sigma2)
    rep_b = rate_uplink({(1, 1): P1, (2, 1): P2}, [(1, 1), (2, 1)], H, sigma2)
    rows.append({"point_type": "corner", "R1": rep_a.totals[1], "R2": rep_a.totals[2], "beta1": 1.0, "order": "s2>s1"})
    rows.append({"point_type": "corner", "R1": rep_b.totals[1], "R2": rep_b.totals[2], "beta1": 1.0, "order": "s1>s2"})
    # dominant face: R1 + R2 = sum capacity, traversed by splitting user 1
    r2_lo = rep_a.totals[2]
    r2_hi = rep_b.totals[2]
    for i in range(n_face):
        frac = i / (n_face - 1) if n_face > 1 else 0.0
        r2_target = r2_lo + frac * (r2_hi - r2_lo)
        # choose P12 (decoded last, clean) so that user 2 sees only s11:
        # R2 = log2(1 + g2 / (1 + P12 |h|^2 / sigma2))
        excess = g2 / (2.0**r2_target - 1.0) - 1.0 if r2_target > 0 else math.inf
        p12 = min(P1, max(0.0, excess * sigma2 / h_abs**2))
        p11 = P1 - p12
        powers = {(1, 1): p11, (1, 2): p12, (2, 1): P2}
        active_order = [s for s in [(1, 1), (2, 1), (1, 2)] if powers[s] > 0]
        rep = rate_uplink(powers, active_order, H, sigma2)
        rows.append(
            {
                "point_type": "face",
                "R1": rep.totals[1],
                "R2": rep.totals[2],
                "beta1": p11 / P1 if P1 > 0 else 0.0,
                "order": "s11>s2>s12",
            }
        )
    fields = ["point_type", "R1", "R2", "beta1", "order"]
    return RecipeResult("uplink-region", {"uplink-region": (fields, rows)})


def _recipe_oper_region(params: Mapping) -> RecipeResult:
    n = int(params.get("grid", 10))
    rho_grid = params.get("rho_grid", tuple(np.linspace(0.05, 0.95, n)))
    gamma_grid = params.get("gamma_grid", tuple(np.linspace(-20.0, 0.0, n)))
    weights = params.get("weights", (1.0, 1.0))
    epsilon = float(params.get("epsilon", 0.1))
    snr_db = float(params.get("snr_db", 20.0))
    cells = classify_operational_region(
        rho_grid, gamma_grid, weights, epsilon, snr_db, _solver_spec(params)
    )
    rows = [
        {
            "rho": c.rho,
            "gamma_db": c.gamma_db,
            "label": c.label,
            "wsr_rsma": c.wsr_rsma,
            "wsr_sdma": c.wsr_sdma,
            "wsr_noma": c.wsr_noma,
            "wsr_oma": c.wsr_oma,
            "epsilon": c.epsilon,
        }
        for c in cells
    ]
    fields = ["rho", "gamma_db", "label", "wsr_rsma", "wsr_sdma", "wsr_noma", "wsr_oma", "epsilon"]
    return RecipeResult("oper-region", {"oper-region": (fields, rows)})


RECIPES = {
    "rate-region": _recipe_rate_region,
    "esr-vs-alpha": _recipe_esr_vs_alpha,
    "mmf-vs-snr": _recipe_mmf_vs_snr,
    "dof-slope": _recipe_dof_slope,
    "overloaded-qos": _recipe_overloaded_qos,
    "uplink-region": _recipe_uplink_region,
    "oper-region": _recipe_oper_region,
}


def run_experiment(recipe: str, params: Mapping | None = None) -> RecipeResult:
    """Run one named experiment and return its CSV tables."""
    if recipe not in RECIPES:
        raise ValueError(f"unknown recipe {recipe!r}")
    return RECIPES[recipe](params or {})
