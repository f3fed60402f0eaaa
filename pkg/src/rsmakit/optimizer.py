"""Joint precoder and common-rate optimization for 1-layer RS and its specializations.

The solver maximizes WSR or the max-min rate subject to total power, QoS
thresholds, and common-stream decodability.  It alternates between a
rate-to-MSE reformulation (closed-form receive scalars and MSE weights at
the current iterate) and a convex inner subproblem in the precoders and the
common-rate split, which is driven by exact per-stream quadratic
maximization under the power ball plus multiplicative weights for the min
terms.  A safeguard accepts an iterate only when the exact objective
improves, so the reported trace is monotone by construction.

Imperfect CSIT is handled by scenario sets: sampled worst case takes the
minimum of every decode rate over channels drawn in the uncertainty sphere
(a pessimistic surrogate, labeled as such), and ergodic SAA averages decode
rates over conditional channel draws before forming stream rates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence, Union

import numpy as np

from .channels import ChannelSampler, trial_rng
from .model import PrecoderSolution, Scheme, StreamLayout, SystemConfig, build_stream_layout
from .precoders import rzf_directions, svd_common

__all__ = [
    "PerfectCsit",
    "SampledWorstCase",
    "ErgodicSaa",
    "OptimizeSpec",
    "SolveResult",
    "solve",
    "solve_mmf",
    "solve_noma_best",
    "oma_best_wsr",
    "sweep_weights",
]

_LN2 = math.log(2.0)
_SUPPORTED = {Scheme.ONE_LAYER_RS, Scheme.SDMA, Scheme.NOMA, Scheme.OMA, Scheme.MULTICAST}


@dataclass(frozen=True)
class PerfectCsit:
    kind: str = field(default="perfect", init=False)


@dataclass(frozen=True)
class SampledWorstCase:
    """Optimize the minimum over channels sampled in the delta-uncertainty sphere."""

    delta: float
    n_samples: int = 16
    seed: int = 0
    kind: str = field(default="sampled-worst-case", init=False)


@dataclass(frozen=True)
class ErgodicSaa:
    """Sample-average objective over conditional channel draws given the estimate."""

    sampler: ChannelSampler
    m_samples: int = 8
    kind: str = field(default="ergodic-saa", init=False)


CsitMode = Union[PerfectCsit, SampledWorstCase, ErgodicSaa]


@dataclass(frozen=True)
class OptimizeSpec:
    objective: str = "wsr"  # "wsr" | "mmf"
    csit: CsitMode = PerfectCsit()
    tol: float = 1e-4
    max_iters: int = 200
    restarts: int = 3
    seed: int = 0
    inner_rounds: int = 6
    init_tau: float = 0.5
    pin_common_zero: bool = False

    def __post_init__(self):
        if self.objective not in ("wsr", "mmf"):
            raise ValueError(f"unknown objective {self.objective!r}")
        if not self.tol > 0:
            raise ValueError("tolerance must be > 0")
        if self.max_iters < 1 or self.restarts < 1:
            raise ValueError("max_iters and restarts must be >= 1")


@dataclass(frozen=True)
class SolveResult:
    solution: PrecoderSolution
    objective: float
    trace: tuple[float, ...]
    converged: bool
    feasible: bool
    constraints: dict
    label: str
    totals: tuple[float, ...]
    iterations: int

    @property
    def rates(self) -> tuple[float, ...]:
        return self.totals


# -- engine -------------------------------------------------------------------


class _Engine:
    """Shared state for one (layout, cfg, scenario set) optimization."""

    def __init__(
        self,
        layout: StreamLayout,
        cfg: SystemConfig,
        scenarios: Sequence[np.ndarray],
        agg: str,
        objective: str,
        offsets: np.ndarray | None = None,
    ):
        self.layout = layout
        self.cfg = cfg
        self.objective = objective
        self.agg = agg
        self.offsets = np.zeros(cfg.K) if offsets is None else np.asarray(offsets, dtype=float)
        self.labels = list(layout.labels)
        self.S = len(self.labels)
        self.sidx = {lab: i for i, lab in enumerate(self.labels)}
        K, M = cfg.K, cfg.M
        self.n_scen = len(scenarios)
        # HC[i, k, :] = conj(h_k) for scenario i, so HC[i,k] @ p = h_k^H p
        self.HC = np.stack([H.conj().T for H in scenarios])  # (n_scen, K, M)
        self.Hrows = self.HC.conj()  # h_k as row vectors
        # outer products h h^H per scenario and user
        self.O = np.einsum("ikm,ikn->ikmn", self.Hrows, self.HC)
        self.noise = np.asarray(cfg.noise_var)
        self.u = np.asarray(cfg.weights)
        self.qos = np.asarray(cfg.qos)
        self.P_budget = cfg.P

        # decode stages: (stream index, user, mask of not-yet-cancelled streams)
        stages = []
        for k in range(1, K + 1):
            remaining = set(self.labels)
            for lab in layout.decode_order[k]:
                mask = np.zeros(self.S, dtype=bool)
                for other in remaining:
                    mask[self.sidx[other]] = True
                stages.append((self.sidx[lab], k, mask))
                remaining.discard(lab)
        self.stages = stages
        self.n_st = len(stages)
        self.st_s = np.array([s for s, _, _ in stages])
        self.st_k = np.array([k - 1 for _, k, _ in stages])
        self.st_mask = np.stack([m for _, _, m in stages])  # (n_st, S)

        # owners / decoders / common bookkeeping
        self.owners = [sorted(s.owners) for s in layout.streams]
        self.decoders = [sorted(s.users) for s in layout.streams]
        commons = [i for i, s in enumerate(layout.streams) if s.is_common]
        if len(commons) > 1:
            raise ValueError("optimizer supports at most one shared common stream")
        self.common = commons[0] if commons else None
        self.single_owner = {
            i: self.owners[i][0] - 1 for i in range(self.S) if len(self.owners[i]) == 1
        }
        # stages grouped per stream, as (stage index, scenario-agnostic)
        self.stages_of_stream = [
            [t for t in range(self.n_st) if self.st_s[t] == si] for si in range(self.S)
        ]
        # indicator tensors for the quadratic assembly
        self.IndA = np.zeros((self.n_st, self.S, K))
        for t in range(self.n_st):
            self.IndA[t, self.st_mask[t], self.st_k[t]] = 1.0
        self.IndB = np.zeros((self.n_st, self.S))
        for t in range(self.n_st):
            self.IndB[t, self.st_s[t]] = 1.0

    # -- exact evaluation ------------------------------------------------

    def stream_powers(self, P: np.ndarray) -> np.ndarray:
        """X[i, k, s] = |h_{k,i}^H p_s|^2."""
        inner = np.einsum("ikm,sm->iks", self.HC, P)
        return np.abs(inner) ** 2, inner

    def stage_rates(self, P: np.ndarray):
        X, inner = self.stream_powers(P)
        Xst = X[:, self.st_k, :]  # (n_scen, n_st, S)
        T = np.einsum("its,ts->it", Xst, self.st_mask) + self.noise[self.st_k][None, :]
        sig = X[:, self.st_k, self.st_s]  # (n_scen, n_st)
        rates = np.log2(1.0 + sig / (T - sig))
        return rates, T, inner

    def agg_decode_rates(self, rates: np.ndarray) -> dict[tuple[int, int], float]:
        """Aggregate per-(stream,user) rates over scenarios (mean or min)."""
        out = {}
        for t in range(self.n_st):
            col = rates[:, t]
            v = float(col.mean()) if self.agg == "mean" else float(col.min())
            out[(int(self.st_s[t]), int(self.st_k[t]))] = v
        return out

    def stream_rates(self, r_sk: Mapping[tuple[int, int], float]) -> np.ndarray:
        r_s = np.zeros(self.S)
        for si in range(self.S):
            vals = [r_sk[(si, k - 1)] for k in self.decoders[si]]
            r_s[si] = min(vals) if vals else 0.0
        return r_s

    def allocate(self, r_s: np.ndarray, v: np.ndarray):
        """Exact allocation of the common budget given user-level weights v.

        Deficit-first against the QoS thresholds, remainder per objective:
        to the max-weight owner for WSR, water-filled for MMF.  Returns
        (totals, alloc vector over users, shortfall).
        """
        K = self.cfg.K
        base = np.zeros(K)
        for si, owner in self.single_owner.items():
            base[owner] += r_s[si]
        alloc = np.zeros(K)
        shortfall = 0.0
        if self.common is None:
            shortfall = float(np.maximum(self.qos - base, 0.0).sum())
            return base, alloc, shortfall
        budget = float(r_s[self.common])
        owners = [k - 1 for k in self.owners[self.common]]
        deficits = np.zeros(K)
        for k in owners:
            deficits[k] = max(0.0, self.qos[k] - base[k])
        need = float(deficits.sum())
        # users outside the owner set cannot be helped by the common stream
        shortfall += float(
            sum(max(0.0, self.qos[k] - base[k]) for k in range(K) if k not in owners)
        )
        if need >= budget:
            if need > 0:
                alloc[list(owners)] = deficits[list(owners)] * (budget / need)
            shortfall += need - budget
            remainder = 0.0
        else:
            alloc[list(owners)] = deficits[list(owners)]
            remainder = budget - need
        if remainder > 0:
            if self.objective == "mmf":
                from .rates import maxmin_waterfill

                cur = [base[k] + alloc[k] - self.offsets[k] for k in owners]
                extra = maxmin_waterfill(cur, remainder)
                for k, e in zip(owners, extra):
                    alloc[k] += e
            else:
                best = max(owners, key=lambda k: v[k])
                alloc[best] += remainder
        return base + alloc, alloc, shortfall

    def exact_objective(self, totals: np.ndarray) -> float:
        if self.objective == "wsr":
            return float(self.u @ totals)
        return float(np.min(totals - self.offsets))

    def evaluate(self, P: np.ndarray, v: np.ndarray):
        rates, _, _ = self.stage_rates(P)
        r_sk = self.agg_decode_rates(rates)
        r_s = self.stream_rates(r_sk)
        totals, alloc, shortfall = self.allocate(r_s, v)
        return rates, r_sk, r_s, totals, alloc, shortfall

    # -- surrogate machinery ----------------------------------------------

    def anchor(self, P: np.ndarray):
        """Closed-form MMSE receive scalars and MSE weights at the anchor point."""
        rates, T, inner = self.stage_rates(P)
        a_sig = inner[:, self.st_k, self.st_s]  # (n_scen, n_st)
        g = a_sig / T
        e = 1.0 - (np.abs(a_sig) ** 2) / T
        e = np.maximum(e, 1e-15)
        w = 1.0 / (e * _LN2)
        return g, w

    def init_branch_state(self) -> dict[int, np.ndarray]:
        """Uniform accumulator over each stream's decode branches."""
        state = {}
        for si in range(self.S):
            ts = self.stages_of_stream[si]
            if not ts:
                continue
            n_branch = len(ts) if self.agg == "mean" else len(ts) * self.n_scen
            state[si] = np.full(n_branch, 1.0 / n_branch)
        return state

    def _branch_weights(
        self, rates: np.ndarray, state: dict[int, np.ndarray], temp: float
    ) -> np.ndarray:
        """Update the per-stream branch weights multiplicatively and expand to atoms.

        A stream's rate is the minimum over its decode branches (decoders for
        mean aggregation, decoder-scenario pairs for min aggregation).  The
        accumulated exponentiated-gradient weights settle on the mixture that
        balances the active minima, which a one-shot argmin would oscillate
        around.  Returns lam[i, t]; each stream's atom weights sum to 1.
        """
        lam = np.zeros((self.n_scen, self.n_st))
        for si, acc in state.items():
            ts = self.stages_of_stream[si]
            if self.agg == "mean":
                vals = np.array([rates[:, t].mean() for t in ts])
            else:
                vals = np.stack([rates[:, t] for t in ts], axis=1).T.ravel()  # branch-major
            acc = acc * np.exp(-(vals - vals.min()) / max(temp, 1e-9))
            acc = np.maximum(acc / acc.sum(), 1e-12)
            state[si] = acc
            if self.agg == "mean":
                for t, wt in zip(ts, acc):
                    lam[:, t] = wt / self.n_scen
            else:
                per = acc.reshape(len(ts), self.n_scen)
                for j, t in enumerate(ts):
                    lam[:, t] = per[j]
        return lam

    def _stream_coefs(self, v: np.ndarray) -> np.ndarray:
        coef = np.zeros(self.S)
        for si in range(self.S):
            owners = [k - 1 for k in self.owners[si]]
            coef[si] = max(v[k] for k in owners)
        return coef

    def update_precoders(self, Omega: np.ndarray, g: np.ndarray, w: np.ndarray) -> np.ndarray:
        """Exact maximizer of the weighted quadratic surrogate on the power ball."""
        coefA = Omega * w * np.abs(g) ** 2  # (n_scen, n_st)
        coefB = Omega * w * g
        coefUS = np.einsum("it,tsk->sik", coefA, self.IndA)
        A = np.einsum("sik,ikmn->smn", coefUS, self.O)
        Hst = self.Hrows[:, self.st_k, :]  # (n_scen, n_st, M)
        b = np.einsum("it,ts,itm->sm", coefB, self.IndB, Hst)
        return _ball_constrained_argmax(A, b, self.P_budget)


def _ball_constrained_argmax(A: np.ndarray, b: np.ndarray, budget: float) -> np.ndarray:
    """Solve per-stream (A_s + mu I) p_s = b_s with one multiplier for sum ||p||^2 <= budget."""
    S, M, _ = A.shape
    ds = np.zeros((S, M))
    cs = np.zeros((S, M), dtype=complex)
    Vs = np.zeros((S, M, M), dtype=complex)
    for s in range(S):
        d, V = np.linalg.eigh(A[s])
        ds[s] = np.maximum(d, 0.0)
        Vs[s] = V
        cs[s] = V.conj().T @ b[s]
    c2 = np.abs(cs) ** 2

    def power(mu: float) -> float:
        return float((c2 / (ds + mu) ** 2).sum())

    total_b = float(c2.sum())
    if total_b == 0.0:
        return np.zeros((S, M), dtype=complex)
    # try unconstrained solution when A is safely invertible
    dmin = ds.min()
    if dmin > 1e-12 and power(0.0) <= budget:
        mu = 0.0
    else:
        hi = math.sqrt(total_b / budget) + 1e-30
        lo = 0.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if mid == lo or mid == hi:
                break
            if power(mid) > budget:
                lo = mid
            else:
                hi = mid
        mu = hi
    P = np.zeros((S, M), dtype=complex)
    for s in range(S):
        P[s] = Vs[s] @ (cs[s] / (ds[s] + mu))
    used = float((np.abs(P) ** 2).sum())
    if used > budget and used > 0:
        P *= math.sqrt(budget / used)
    return P


# -- initialization ------------------------------------------------------------


def _initial_points(
    layout: StreamLayout,
    cfg: SystemConfig,
    H_design: np.ndarray,
    spec: OptimizeSpec,
) -> list[np.ndarray]:
    """Restart starting points: RZF privates + SVD common at several power splits.

    The restart set always contains a zero-common start so schemes that
    subsume SDMA can never do worse than their private-only specialization;
    additional restarts perturb the directions with small Gaussian noise.
    """
    S = len(layout.labels)
    M, K = cfg.M, cfg.K
    sidx = {lab: i for i, lab in enumerate(layout.labels)}
    rzf = rzf_directions(H_design, cfg=cfg)
    common_labels = [s.label for s in layout.streams if s.is_common]
    base = np.zeros((S, M), dtype=complex)
    for s in layout.streams:
        if s.is_common:
            base[sidx[s.label]] = svd_common(H_design)
        else:
            (owner,) = s.owners
            base[sidx[s.label]] = rzf[:, owner - 1]

    def scaled(tau: float) -> np.ndarray:
        P = np.array(base)
        n_common = len(common_labels)
        n_priv = S - n_common
        p_common = (1.0 - tau) * cfg.P if n_common else 0.0
        p_priv = cfg.P - p_common
        for s in layout.streams:
            i = sidx[s.label]
            if s.is_common:
                P[i] = P[i] * math.sqrt(p_common / n_common)
            else:
                P[i] = P[i] * math.sqrt(p_priv / n_priv) if n_priv else P[i] * 0
        return P

    def noma_like(beneficiary: int) -> np.ndarray:
        """Zero the beneficiary's private stream, point the common stream at it."""
        P = np.zeros((S, M), dtype=complex)
        others = [s for s in layout.streams if not s.is_common and s.owners != {beneficiary}]
        for lab in common_labels:
            h = H_design[:, beneficiary - 1]
            n = np.linalg.norm(h)
            d = h / n if n > 0 else base[sidx[lab]]
            P[sidx[lab]] = d * math.sqrt(0.8 * cfg.P / len(common_labels))
        for s in others:
            P[sidx[s.label]] = base[sidx[s.label]] * math.sqrt(0.2 * cfg.P / max(1, len(others)))
        return P

    def overloaded() -> np.ndarray:
        """Privates only for the M strongest users; the common stream serves the rest."""
        P = np.zeros((S, M), dtype=complex)
        norms = np.linalg.norm(H_design, axis=0)
        keep = set(int(i) + 1 for i in np.argsort(-norms, kind="stable")[:M])
        kept = [s for s in layout.streams if not s.is_common and next(iter(s.owners)) in keep]
        for lab in common_labels:
            P[sidx[lab]] = base[sidx[lab]] * math.sqrt(0.5 * cfg.P / len(common_labels))
        for s in kept:
            P[sidx[s.label]] = base[sidx[s.label]] * math.sqrt(0.5 * cfg.P / max(1, len(kept)))
        return P

    def skewed() -> np.ndarray:
        """Most power on the strongest user's private stream (single-user corner)."""
        P = np.zeros((S, M), dtype=complex)
        privates = [i for i, s in enumerate(layout.streams) if not s.is_common]
        norms = np.array(
            [np.linalg.norm(H_design[:, next(iter(layout.streams[i].owners)) - 1]) for i in privates]
        )
        strongest = privates[int(np.argmax(norms))]
        for i in privates:
            share = 0.85 if i == strongest else 0.15 / max(1, len(privates) - 1)
            P[i] = base[i] * math.sqrt(share * cfg.P)
        return P

    variants: list[np.ndarray]
    if spec.pin_common_zero or not common_labels:
        variants = [scaled(1.0)]
        if not common_labels and layout.scheme is Scheme.SDMA and K > 2:
            variants.append(skewed())
    elif layout.scheme is Scheme.MULTICAST:
        variants = [scaled(0.0)]
    elif layout.scheme is Scheme.NOMA:
        variants = [scaled(spec.init_tau)]
    else:
        heavy = int(np.argmax(cfg.weights)) + 1
        variants = [scaled(spec.init_tau), scaled(1.0), noma_like(heavy), scaled(0.1)]
        if K == 2:
            variants.append(noma_like(3 - heavy))
        if K > 2:
            variants.insert(2, skewed())
        if K > M:
            variants.insert(2, overloaded())
    points = variants[: spec.restarts]
    r = 0
    while len(points) < spec.restarts:
        rng = trial_rng(spec.seed, r, stream=11)
        P = np.array(variants[r % len(variants)])
        noise = (rng.standard_normal(P.shape) + 1j * rng.standard_normal(P.shape)) * (
            0.3 * np.linalg.norm(P) / math.sqrt(2 * P.size)
        )
        P = P + noise
        used = float((np.abs(P) ** 2).sum())
        if used > cfg.P:
            P *= math.sqrt(cfg.P / used)
        points.append(P)
        r += 1
    return points


def _build_scenarios(layout: StreamLayout, cfg: SystemConfig, channel: np.ndarray, csit: CsitMode):
    if isinstance(csit, PerfectCsit):
        return [np.asarray(channel, dtype=complex)], "mean", "perfect CSIT"
    if isinstance(csit, SampledWorstCase):
        H_hat = np.asarray(channel, dtype=complex)
        scen = [H_hat]
        rng = trial_rng(csit.seed, 0, stream=13)
        for _ in range(max(0, csit.n_samples - 1)):
            pert = rng.standard_normal((cfg.M, cfg.K)) + 1j * rng.standard_normal((cfg.M, cfg.K))
            pert /= np.linalg.norm(pert, axis=0, keepdims=True)
            scen.append(H_hat + csit.delta * pert)
        return scen, "min", "sampled worst-case lower bound"
    if isinstance(csit, ErgodicSaa):
        H_hat = np.asarray(channel, dtype=complex)
        scen = [csit.sampler.conditional(H_hat, j) for j in range(csit.m_samples)]
        return scen, "mean", "ergodic sample average"
    raise ValueError(f"unknown csit mode {csit}")


# -- main solve ----------------------------------------------------------------


def _run_engine(
    eng: _Engine,
    P0: np.ndarray,
    spec: OptimizeSpec,
    use_qos_duals: bool,
) -> tuple[np.ndarray, list[float], bool]:
    """Safeguarded MM ascent from one starting point.

    Without QoS the trace is the exact objective of the accepted iterates.
    With QoS thresholds the run is a feasible-ascent: iterates that violate
    a threshold are never accepted (dual pressure keeps proposals feasible),
    unless the run has not reached feasibility yet, in which case the
    shortfall is driven down first.
    """
    nu = np.zeros(eng.cfg.K)
    if use_qos_duals:
        nu = np.where(eng.qos > 0, float(eng.u.max()), 0.0)
    P = np.array(P0)
    v = eng.u + nu if eng.objective == "wsr" else np.full(eng.cfg.K, 1.0 / eng.cfg.K)
    _, _, _, totals, _, shortfall = eng.evaluate(P, v)

    def score(totals_x, shortfall_x):
        # lexicographic: feasibility first, then the exact objective
        feas = shortfall_x <= 1e-9
        obj = eng.exact_objective(totals_x)
        return (feas, obj if feas else -shortfall_x)

    best_score = score(totals, shortfall)
    trace = [best_score[1]]
    converged = False
    small_gains = 0
    theta_acc = np.full(eng.cfg.K, 1.0 / eng.cfg.K)
    for it in range(spec.max_iters):
        g, w = eng.anchor(P)
        P_round = np.array(P)
        branch_state = eng.init_branch_state()
        round_best = None
        round_best_P = P_round
        for r in range(spec.inner_rounds):
            rates, _, _ = eng.stage_rates(P_round)
            r_sk = eng.agg_decode_rates(rates)
            r_s = eng.stream_rates(r_sk)
            if eng.objective == "wsr":
                v = eng.u + nu
            else:
                totals_r, _, _ = eng.allocate(r_s, np.ones(eng.cfg.K))
                theta_acc = theta_acc * np.exp(
                    -(totals_r - eng.offsets - (totals_r - eng.offsets).min()) / 0.25
                )
                theta_acc = np.maximum(theta_acc / theta_acc.sum(), 1e-12)
                v = theta_acc + nu
            totals_r, _, shortfall_r = eng.allocate(r_s, v)
            sc = score(totals_r, shortfall_r)
            if round_best is None or sc > round_best:
                round_best = sc
                round_best_P = np.array(P_round)
            coef = eng._stream_coefs(v)
            lam = eng._branch_weights(rates, branch_state, temp=0.25)
            Omega = lam * coef[eng.st_s][None, :]
            P_round = eng.update_precoders(Omega, g, w)
        _, _, _, totals_f, _, shortfall_f = eng.evaluate(P_round, v)
        sc_final = score(totals_f, shortfall_f)
        if sc_final > round_best:
            round_best = sc_final
            round_best_P = P_round
        if round_best > best_score:
            gain = round_best[1] - best_score[1] if round_best[0] == best_score[0] else math.inf
            best_score = round_best
            P = round_best_P
        else:
            gain = 0.0
        trace.append(best_score[1])
        if use_qos_duals:
            _, _, _, totals_now, _, _ = eng.evaluate(P, v)
            # keep a guard band above the thresholds so proposals stay feasible
            margin = 0.05 * np.maximum(eng.qos, 0.02)
            pressure = eng.qos + margin - totals_now
            step = 1.0 * (float(eng.u.max()) + 1.0) / math.sqrt(it + 1.0)
            nu = np.where(
                pressure > 0,
                np.maximum(nu * 1.5 + step * pressure, 0.05 * float(eng.u.max())),
                np.maximum(0.0, nu * 0.8 - step * (-pressure)),
            )
        small_gains = small_gains + 1 if gain < spec.tol else 0
        if small_gains >= 2 and it >= 2:
            converged = True
            break
    return P, trace, converged


def solve(
    layout: StreamLayout,
    cfg: SystemConfig,
    channel: np.ndarray,
    spec: OptimizeSpec | None = None,
) -> SolveResult:
    """Optimize precoders and common-rate split for one layout.

    ``channel`` is the true channel for perfect CSIT and the transmitter-side
    estimate otherwise.  Returns the best result over restarts; QoS
    infeasibility is detected by a feasibility pre-phase and reported in the
    result rather than raised.
    """
    spec = spec or OptimizeSpec()
    if layout.scheme not in _SUPPORTED:
        raise ValueError(f"optimizer does not support scheme {layout.scheme.value}")
    if layout.scheme is Scheme.NOMA and layout.K != 2:
        raise ValueError("NOMA optimization is limited to K=2")
    scenarios, agg, label = _build_scenarios(layout, cfg, channel, spec.csit)
    eng = _Engine(layout, cfg, scenarios, agg, spec.objective)
    has_qos = bool(np.any(np.asarray(cfg.qos) > 0))

    # feasibility pre-phase: maximize the minimum QoS slack
    feas_P = None
    if has_qos:
        feas_eng = _Engine(layout, cfg, scenarios, agg, "mmf", offsets=np.asarray(cfg.qos))
        feas_spec = replace(spec, objective="mmf", max_iters=min(spec.max_iters, 60))
        P0 = _initial_points(layout, cfg, np.asarray(channel), feas_spec)[0]
        Pf, _, _ = _run_engine(feas_eng, P0, feas_spec, use_qos_duals=False)
        v0 = np.ones(cfg.K)
        _, _, _, totals_f, _, _ = feas_eng.evaluate(Pf, v0)
        if float(np.min(totals_f - np.asarray(cfg.qos))) < -1e-8:
            sol = _solution_from(eng, Pf, np.ones(cfg.K))
            obj_f = eng.exact_objective(totals_f)
            return SolveResult(
                solution=sol,
                objective=obj_f,
                trace=(obj_f,),
                converged=True,
                feasible=False,
                constraints=_constraint_report(eng, Pf, np.ones(cfg.K)),
                label=label + " (QoS infeasible)",
                totals=tuple(float(t) for t in totals_f),
                iterations=0,
            )
        feas_P = Pf

    points = _initial_points(layout, cfg, np.asarray(channel), spec)
    if feas_P is not None:
        points[0] = feas_P
    best = None
    for P0 in points:
        P, trace, converged = _run_engine(eng, P0, spec, use_qos_duals=has_qos)
        v = eng.u if spec.objective == "wsr" else np.ones(cfg.K)
        _, _, _, totals, _, shortfall = eng.evaluate(P, v)
        obj = eng.exact_objective(totals)
        feas = shortfall <= 1e-8
        key = (feas, obj if feas else -shortfall)
        if best is None or key > best[0]:
            best = (key, P, trace, converged, totals, shortfall)
    _, P, trace, converged, totals, shortfall = best
    v_final = eng.u if spec.objective == "wsr" else np.ones(cfg.K)
    sol = _solution_from(eng, P, v_final)
    feasible = shortfall <= 1e-8
    return SolveResult(
        solution=sol,
        objective=eng.exact_objective(totals),
        trace=tuple(trace),
        converged=converged,
        feasible=feasible,
        constraints=_constraint_report(eng, P, v_final),
        label=label,
        totals=tuple(float(t) for t in totals),
        iterations=len(trace) - 1,
    )


def _solution_from(eng: _Engine, P: np.ndarray, v: np.ndarray) -> PrecoderSolution:
    rates, _, _ = eng.stage_rates(P)
    r_sk = eng.agg_decode_rates(rates)
    r_s = eng.stream_rates(r_sk)
    _, alloc, _ = eng.allocate(r_s, v)
    precoders = {lab: P[i].copy() for lab, i in eng.sidx.items()}
    common_alloc = {}
    if eng.common is not None:
        lab = eng.labels[eng.common]
        for k in eng.owners[eng.common]:
            common_alloc[(lab, k)] = float(alloc[k - 1])
    return PrecoderSolution(precoders=precoders, common_alloc=common_alloc).validate(
        eng.layout, eng.cfg.P
    )


def _constraint_report(eng: _Engine, P: np.ndarray, v: np.ndarray) -> dict:
    _, _, r_s, totals, alloc, shortfall = eng.evaluate(P, v)
    power_used = float((np.abs(P) ** 2).sum())
    report = {
        "power_used": power_used,
        "power_budget": eng.P_budget,
        "power_slack": eng.P_budget - power_used,
        "qos_slack": tuple(float(t - q) for t, q in zip(totals, eng.qos)),
        "qos_shortfall": shortfall,
    }
    if eng.common is not None:
        report["common_rate"] = float(r_s[eng.common])
        report["common_alloc_sum"] = float(alloc.sum())
        report["common_power"] = float((np.abs(P[eng.common]) ** 2).sum())
    return report


def solve_mmf(
    layout: StreamLayout,
    cfg: SystemConfig,
    channel: np.ndarray,
    spec: OptimizeSpec | None = None,
) -> SolveResult:
    """Max-min fairness variant of :func:`solve`."""
    spec = spec or OptimizeSpec()
    return solve(layout, cfg, channel, replace(spec, objective="mmf"))


def solve_noma_best(
    cfg: SystemConfig,
    channel: np.ndarray,
    spec: OptimizeSpec | None = None,
) -> SolveResult:
    """Two-user NOMA: enumerate both decoding orders, return the better solve."""
    if cfg.K != 2:
        raise ValueError("NOMA optimization is limited to K=2")
    best = None
    for order in ((1, 2), (2, 1)):
        layout = build_stream_layout(Scheme.NOMA, 2, orders=order)
        res = solve(layout, cfg, channel, spec)
        if best is None or (res.feasible, res.objective) > (best.feasible, best.objective):
            best = res
    return best


def oma_best_wsr(cfg: SystemConfig, H: np.ndarray) -> float:
    """Best weighted single-user rate: full power, matched beamforming.

    Time sharing cannot improve a weighted sum objective beyond its best
    vertex, so this is the OMA WSR.
    """
    best = 0.0
    for k in range(1, cfg.K + 1):
        h = H[:, k - 1]
        rate = math.log2(1.0 + cfg.P * float(np.vdot(h, h).real) / cfg.noise_var[k - 1])
        best = max(best, cfg.weights[k - 1] * rate)
    return best


def sweep_weights(
    layout: StreamLayout,
    cfg: SystemConfig,
    channel: np.ndarray,
    weight_list: Sequence[Sequence[float]],
    spec: OptimizeSpec | None = None,
) -> list[tuple[tuple[float, ...], SolveResult]]:
    """One boundary point of the rate region per weight vector."""
    if len(weight_list) < 2:
        raise ValueError("need at least two weight vectors")
    out = []
    for wts in weight_list:
        cfg_w = SystemConfig.create(cfg.M, cfg.K, cfg.P, cfg.noise_var, wts, cfg.qos)
        res = solve(layout, cfg_w, channel, spec)
        out.append((tuple(float(w) for w in wts), res))
    return out
