"""Achievable-rate evaluation for any (layout, precoders, channel) triple.

All rates are in bit/s/Hz (log base 2) under Gaussian signaling and infinite
block length.  Downlink decoding walks each user's SIC order: a stream being
decoded sees every stream not yet cancelled at that user as interference.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence, TextIO

import numpy as np

from .channels import ChannelPair, trial_rng
from .model import PrecoderSolution, RateReport, StreamLayout, SystemConfig

__all__ = [
    "SinrTerm",
    "sinr_terms",
    "rate_downlink",
    "allocate_common_rate",
    "apply_common_alloc",
    "rate_uplink",
    "uplink_sum_capacity",
    "worst_case_rates",
    "ergodic_rates",
    "maxmin_waterfill",
    "report_to_csv",
]


@dataclass(frozen=True)
class SinrTerm:
    """The SINR ingredients of one (stream, user) decode stage."""

    stream: str
    user: int
    signal: float
    interference: float
    noise: float

    @property
    def rate(self) -> float:
        return math.log2(1.0 + self.signal / (self.interference + self.noise))


def _check_dims(layout: StreamLayout, sol: PrecoderSolution, H: np.ndarray, cfg: SystemConfig):
    if H.shape != (cfg.M, cfg.K):
        raise ValueError(f"channel must be {cfg.M}x{cfg.K}, got {H.shape}")
    if layout.K != cfg.K:
        raise ValueError(f"layout is for K={layout.K}, config has K={cfg.K}")
    sol_labels = set(sol.precoders.keys())
    lay_labels = set(layout.labels)
    if sol_labels != lay_labels:
        raise ValueError(f"precoder streams {sorted(sol_labels)} do not match layout {sorted(lay_labels)}")
    for lab, p in sol.precoders.items():
        if np.asarray(p).shape != (cfg.M,):
            raise ValueError(f"precoder {lab} must have length M={cfg.M}")


def sinr_terms(
    layout: StreamLayout, sol: PrecoderSolution, H: np.ndarray, cfg: SystemConfig
) -> list[SinrTerm]:
    """Per-(stream, user) SINR breakdown following each user's SIC order."""
    _check_dims(layout, sol, H, cfg)
    labels = layout.labels
    # received power of every stream at every user
    power = {}
    for lab in labels:
        p = np.asarray(sol.precoders[lab])
        for k in range(1, cfg.K + 1):
            power[(lab, k)] = float(abs(np.vdot(H[:, k - 1], p)) ** 2)
    terms = []
    for k in range(1, cfg.K + 1):
        cancelled: set[str] = set()
        for lab in layout.decode_order[k]:
            sig = power[(lab, k)]
            # fixed summation order keeps results bit-identical across runs
            interf = sum(
                power[(other, k)] for other in labels if other != lab and other not in cancelled
            )
            terms.append(
                SinrTerm(stream=lab, user=k, signal=sig, interference=interf, noise=cfg.noise_var[k - 1])
            )
            cancelled.add(lab)
    return terms


def _compose_report(
    layout: StreamLayout,
    decode_rates: Mapping[tuple[str, int], float],
    alloc: Mapping[tuple[str, int], float],
) -> RateReport:
    stream_rate = {}
    for s in layout.streams:
        rates = [decode_rates[(s.label, k)] for k in sorted(s.users)]
        stream_rate[s.label] = min(rates) if rates else 0.0
    totals = {k: 0.0 for k in range(1, layout.K + 1)}
    for s in layout.streams:
        if s.is_common:
            for k in s.owners:
                totals[k] += alloc.get((s.label, k), 0.0)
        else:
            (owner,) = s.owners
            totals[owner] += stream_rate[s.label]
    sum_rate = float(sum(totals.values()))
    min_rate = float(min(totals.values()))
    return RateReport(
        stream_rate=stream_rate,
        per_user_decode_rate=dict(decode_rates),
        common_alloc=dict(alloc),
        totals=totals,
        sum_rate=sum_rate,
        min_rate=min_rate,
    )


def maxmin_waterfill(base: Sequence[float], budget: float) -> list[float]:
    """Split a budget across users to maximize the minimum of base_k + share_k.

    Classic water-filling against the profile of current totals: raise the
    lowest totals first.  Exact for a single shared budget.
    """
    n = len(base)
    if budget <= 0:
        return [0.0] * n
    order = sorted(range(n), key=lambda i: base[i])
    shares = [0.0] * n
    remaining = budget
    level = base[order[0]]
    active = [order[0]]
    for nxt in order[1:] + [None]:
        ceiling = math.inf if nxt is None else base[nxt]
        lift = ceiling - level
        cost = lift * len(active)
        if cost >= remaining or nxt is None:
            level += remaining / len(active)
            remaining = 0.0
            break
        level = ceiling
        remaining -= cost
        active.append(nxt)
    for i in active:
        shares[i] = level - base[i]
    return shares


def allocate_common_rate(
    report: RateReport,
    policy: str,
    layout: StreamLayout,
    weights: Sequence[float] | None = None,
) -> dict[tuple[str, int], float]:
    """Divide each common stream's rate among its owners.

    policy: 'equal', 'proportional' (to weights), or 'maxmin'
    (water-fill against the users' current totals, streams processed in
    layout order).  Shares of each stream sum to its achievable rate.
    """
    alloc: dict[tuple[str, int], float] = {}
    base = {k: 0.0 for k in range(1, layout.K + 1)}
    for s in layout.streams:
        if not s.is_common:
            (owner,) = s.owners
            base[owner] += report.stream_rate[s.label]
    for s in layout.streams:
        if not s.is_common:
            continue
        owners = sorted(s.owners)
        rate = report.stream_rate[s.label]
        if policy == "equal":
            shares = [rate / len(owners)] * len(owners)
        elif policy == "proportional":
            if weights is None:
                raise ValueError("proportional policy requires weights")
            w = np.array([weights[k - 1] for k in owners], dtype=float)
            if w.sum() <= 0:
                shares = [rate / len(owners)] * len(owners)
            else:
                shares = list(rate * w / w.sum())
        elif policy == "maxmin":
            shares = maxmin_waterfill([base[k] for k in owners], rate)
        else:
            raise ValueError(f"unknown allocation policy {policy!r}")
        for k, c in zip(owners, shares):
            alloc[(s.label, k)] = float(c)
            base[k] += float(c)
    return alloc


def apply_common_alloc(
    report: RateReport, alloc: Mapping[tuple[str, int], float], layout: StreamLayout
) -> RateReport:
    """Rebuild a report's totals from a given common-rate allocation."""
    return _compose_report(layout, report.per_user_decode_rate, alloc)


def rate_downlink(
    layout: StreamLayout,
    sol: PrecoderSolution,
    H: np.ndarray,
    cfg: SystemConfig,
    alloc_policy: str = "equal",
) -> RateReport:
    """Exact downlink rate report for one channel realization.

    If the solution carries common-rate shares they fix the split proportions
    (rescaled so each stream's shares sum to its achieved rate); otherwise
    the named policy is applied.
    """
    terms = sinr_terms(layout, sol, H, cfg)
    decode_rates = {(t.stream, t.user): t.rate for t in terms}
    report = _compose_report(layout, decode_rates, {})
    alloc = _resolve_alloc(layout, report, sol, alloc_policy, cfg.weights)
    return _compose_report(layout, decode_rates, alloc)


def _resolve_alloc(
    layout: StreamLayout,
    report: RateReport,
    sol: PrecoderSolution,
    policy: str,
    weights: Sequence[float],
) -> dict[tuple[str, int], float]:
    has_requested = any(sol.common_alloc.get((s.label, k), 0.0) > 0 for s in layout.common_streams() for k in s.owners)
    if not has_requested:
        return allocate_common_rate(report, policy, layout, weights)
    alloc: dict[tuple[str, int], float] = {}
    for s in layout.common_streams():
        owners = sorted(s.owners)
        req = np.array([max(0.0, sol.common_alloc.get((s.label, k), 0.0)) for k in owners])
        rate = report.stream_rate[s.label]
        if req.sum() > 0:
            shares = rate * req / req.sum()
        else:
            shares = np.full(len(owners), rate / len(owners))
        for k, c in zip(owners, shares):
            alloc[(s.label, k)] = float(c)
    return alloc


# -- uplink ------------------------------------------------------------------


def rate_uplink(
    stream_powers: Mapping[tuple[int, int], float],
    order: Sequence[tuple[int, int]],
    H: np.ndarray,
    sigma2: float,
    budgets: Sequence[float] | None = None,
) -> RateReport:
    """Uplink RSMA rates for split users under MMSE-SIC.

    ``stream_powers`` maps (user, substream) to transmit power; each user may
    contribute at most two substreams.  ``order`` is the receiver's decode
    sequence over the active (positive-power) streams: the first entry is
    decoded first, suffering interference from all later entries.  For M=1
    each stage reduces to scalar matched filtering.
    """
    M, K = H.shape
    active = [(k, i) for (k, i), p in stream_powers.items() if p > 0]
    per_user = {}
    for (k, i) in stream_powers:
        per_user.setdefault(k, []).append(i)
    if any(len(v) > 2 for v in per_user.values()):
        raise ValueError("each user may be split into at most two substreams")
    if budgets is not None:
        for k in range(1, K + 1):
            used = sum(p for (u, _), p in stream_powers.items() if u == k)
            if used > budgets[k - 1] * (1 + 1e-12):
                raise ValueError(f"user {k} exceeds its power budget")
    if sorted(order) != sorted(active):
        raise ValueError("order must be a permutation of the active streams")

    decode_rates: dict[tuple[str, int], float] = {}
    stream_rate: dict[str, float] = {}
    totals = {k: 0.0 for k in range(1, K + 1)}
    for idx, (k, i) in enumerate(order):
        later = order[idx + 1 :]
        h_k = H[:, k - 1]
        p_ki = stream_powers[(k, i)]
        if M == 1:
            interf = sum(stream_powers[(u, j)] * abs(H[0, u - 1]) ** 2 for (u, j) in later)
            sinr = p_ki * abs(h_k[0]) ** 2 / (sigma2 + interf)
        else:
            C = sigma2 * np.eye(M, dtype=complex)
            for (u, j) in later:
                hu = H[:, u - 1]
                C = C + stream_powers[(u, j)] * np.outer(hu, hu.conj())
            sinr = float((p_ki * np.vdot(h_k, np.linalg.solve(C, h_k))).real)
        label = f"s{k}{i}"
        rate = math.log2(1.0 + sinr)
        decode_rates[(label, k)] = rate
        stream_rate[label] = rate
        totals[k] += rate
    sum_rate = float(sum(totals.values()))
    return RateReport(
        stream_rate=stream_rate,
        per_user_decode_rate=decode_rates,
        common_alloc={},
        totals=totals,
        sum_rate=sum_rate,
        min_rate=float(min(totals.values())),
    )


def uplink_sum_capacity(powers: Sequence[float], H: np.ndarray, sigma2: float) -> float:
    """Multiple-access sum capacity log2 det(I + sum_k P_k h_k h_k^H / sigma2)."""
    M = H.shape[0]
    A = np.eye(M, dtype=complex)
    for k, p in enumerate(powers):
        h = H[:, k]
        A = A + (p / sigma2) * np.outer(h, h.conj())
    sign, logdet = np.linalg.slogdet(A)
    return float(logdet / math.log(2.0))


# -- robustness --------------------------------------------------------------


def worst_case_rates(
    layout: StreamLayout,
    sol: PrecoderSolution,
    H_hat: np.ndarray,
    delta: float | Sequence[float],
    cfg: SystemConfig,
    n_samples: int = 512,
    seed: int = 0,
    alloc_policy: str = "equal",
) -> RateReport:
    """Sampled lower-bound estimate of the worst-case rate report.

    Each user's channel is perturbed independently by n_samples points on and
    inside its delta_k uncertainty sphere: the estimate itself, a
    deterministic adversarial point aligned against the common precoder, and
    uniform sphere samples.  Per-(stream,user) rates are the minima over the
    samples; delta = 0 reproduces the nominal report exactly.
    """
    deltas = np.full(cfg.K, float(delta)) if np.isscalar(delta) else np.asarray([float(d) for d in delta])
    if np.any(deltas < 0):
        raise ValueError("delta must be >= 0")
    nominal_terms = sinr_terms(layout, sol, H_hat, cfg)
    worst = {(t.stream, t.user): t.rate for t in nominal_terms}
    if np.all(deltas == 0):
        report = _compose_report(layout, worst, {})
        alloc = _resolve_alloc(layout, report, sol, alloc_policy, cfg.weights)
        return _compose_report(layout, worst, alloc)

    common = [s.label for s in layout.streams if len(s.users) > 1]
    p_c = None
    if common:
        p_c = np.asarray(sol.precoders[common[0]])
        if np.linalg.norm(p_c) == 0:
            p_c = None
    rng = trial_rng(seed, 0, stream=7)
    for k in range(1, cfg.K + 1):
        dk = deltas[k - 1]
        if dk == 0:
            continue
        perturbs = [np.zeros(cfg.M, dtype=complex)]
        if p_c is not None:
            # adversarial point: walk against the common precoder, stopping at
            # the step that exactly nulls the common signal when reachable
            a = np.vdot(H_hat[:, k - 1], p_c)
            pc_norm = np.linalg.norm(p_c)
            if abs(a) > 0:
                step = min(dk, abs(a) / pc_norm)
                phase = np.conj(a) / abs(a)
                perturbs.append(-step * phase * p_c / pc_norm)
        n_rand = max(0, n_samples - len(perturbs))
        raw = rng.standard_normal((n_rand, cfg.M)) + 1j * rng.standard_normal((n_rand, cfg.M))
        raw /= np.linalg.norm(raw, axis=1, keepdims=True)
        for r in raw:
            perturbs.append(dk * r)
        for pert in perturbs:
            Hk = H_hat.copy()
            Hk[:, k - 1] = H_hat[:, k - 1] + pert
            for t in sinr_terms(layout, sol, Hk, cfg):
                if t.user != k:
                    continue
                key = (t.stream, t.user)
                if t.rate < worst[key]:
                    worst[key] = t.rate
    report = _compose_report(layout, worst, {})
    alloc = _resolve_alloc(layout, report, sol, alloc_policy, cfg.weights)
    return _compose_report(layout, worst, alloc)


def ergodic_rates(
    layout: StreamLayout,
    precoder_rule: Callable[[np.ndarray], PrecoderSolution],
    channel_model: Callable[[int], ChannelPair],
    cfg: SystemConfig,
    trials: int,
    alloc_policy: str = "equal",
) -> RateReport:
    """Average rate report over seeded channel trials.

    The common-stream rate is taken as min-then-average: in every trial the
    stream rate is the minimum over its decoders (decodable per realization),
    and those per-trial rates are averaged.  Per-user standard errors of the
    totals are reported.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    acc_decode: dict[tuple[str, int], float] = {}
    acc_alloc: dict[tuple[str, int], float] = {}
    acc_stream: dict[str, float] = {}
    totals_samples = np.zeros((trials, cfg.K))
    for t in range(trials):
        pair = channel_model(t)
        sol = precoder_rule(pair.H_hat)
        rep = rate_downlink(layout, sol, pair.H, cfg, alloc_policy=alloc_policy)
        for key, v in rep.per_user_decode_rate.items():
            acc_decode[key] = acc_decode.get(key, 0.0) + v
        for key, v in rep.common_alloc.items():
            acc_alloc[key] = acc_alloc.get(key, 0.0) + v
        for lab, v in rep.stream_rate.items():
            acc_stream[lab] = acc_stream.get(lab, 0.0) + v
        for k in range(1, cfg.K + 1):
            totals_samples[t, k - 1] = rep.totals[k]
    totals = {k: float(totals_samples[:, k - 1].mean()) for k in range(1, cfg.K + 1)}
    stderr = {
        k: float(totals_samples[:, k - 1].std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
        for k in range(1, cfg.K + 1)
    }
    return RateReport(
        stream_rate={lab: v / trials for lab, v in acc_stream.items()},
        per_user_decode_rate={key: v / trials for key, v in acc_decode.items()},
        common_alloc={key: v / trials for key, v in acc_alloc.items()},
        totals=totals,
        sum_rate=float(sum(totals.values())),
        min_rate=float(min(totals.values())),
        stderr=stderr,
    )


def report_to_csv(report: RateReport, target: str | TextIO) -> None:
    """CSV form: one row per (stream,user) decode rate plus summary rows."""
    own = isinstance(target, str)
    fh = open(target, "w", newline="") if own else target
    try:
        writer = csv.DictWriter(fh, fieldnames=["kind", "stream", "user", "rate"])
        writer.writeheader()
        for row in report.to_csv_rows():
            writer.writerow(row)
    finally:
        if own:
            fh.close()
