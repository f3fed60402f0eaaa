"""Low-complexity precoder directions and power allocation.

Directions are returned unit-norm; powers are assembled separately so the
rate engine can scale streams independently.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .model import PrecoderSolution, StreamLayout, SystemConfig

__all__ = [
    "PowerSplit",
    "zf_directions",
    "rzf_directions",
    "mbf_common",
    "svd_common",
    "random_common",
    "assemble_solution",
    "optimize_tau",
    "waterfill_powers",
]

@dataclass(frozen=True)
class PowerSplit:
    """Fraction tau of the budget goes to the private streams, 1-tau to the common."""

    tau: float
    private_policy: str = "equal"  # "equal" | "waterfill"

    def __post_init__(self):
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError("tau must lie in [0, 1]")
        if self.private_policy not in ("equal", "waterfill"):
            raise ValueError(f"unknown private power policy {self.private_policy!r}")

    def common_power(self, P: float) -> float:
        return (1.0 - self.tau) * P


def _normalize_columns(A: np.ndarray) -> np.ndarray:
    out = np.array(A, dtype=complex)
    for j in range(out.shape[1]):
        n = np.linalg.norm(out[:, j])
        if n == 0:
            raise ValueError(f"direction column {j} collapsed to zero")
        out[:, j] /= n
    return out


def zf_directions(H_hat: np.ndarray) -> np.ndarray:
    """Zero-forcing private directions: column k is orthogonal to all other users.

    Requires an underloaded system (M >= K) and a full-column-rank estimate.
    Computed per user as the projection onto the orthogonal complement of the
    other users' channels, which stays accurate for nearly aligned channels
    (the effective gain simply collapses toward zero).
    """
    M, K = H_hat.shape
    if M < K:
        raise ValueError("ZF requires underloaded system (M >= K)")
    out = np.zeros((M, K), dtype=complex)
    for k in range(K):
        h = H_hat[:, k]
        others = np.delete(H_hat, k, axis=1)
        if others.size:
            Q, _ = np.linalg.qr(others)
            d = h - Q @ (Q.conj().T @ h)
        else:
            d = h.astype(complex)
        n = np.linalg.norm(d)
        if n <= 1e-12 * max(np.linalg.norm(h), 1e-300):
            raise np.linalg.LinAlgError("channel estimate is (nearly) rank deficient")
        out[:, k] = d / n
    return out


def rzf_directions(H_hat: np.ndarray, kappa: float | None = None, cfg: SystemConfig | None = None) -> np.ndarray:
    """Regularized channel inversion (HH^H + kappa I)^(-1) H, columns normalized.

    kappa defaults to K * sigma^2 * (K / P) when a config is supplied, else
    K / 100; kappa = 0 with M >= K reproduces the ZF directions.
    """
    M, K = H_hat.shape
    if kappa is None:
        if cfg is not None:
            kappa = cfg.K * float(np.mean(cfg.noise_var)) * (cfg.K / cfg.P)
        else:
            kappa = K / 100.0
    if kappa < 0:
        raise ValueError("kappa must be >= 0")
    A = H_hat @ H_hat.conj().T + kappa * np.eye(M)
    # pinv keeps kappa=0 well-defined when M > K (A is then rank deficient)
    F = np.linalg.pinv(A, rcond=1e-12) @ H_hat
    for j in range(K):
        if np.linalg.norm(F[:, j]) == 0:
            # zero channel: any direction carries zero gain, pick a basis vector
            F[0, j] = 1.0
    return _normalize_columns(F)


def mbf_common(H_hat: np.ndarray, weights: Sequence[float] | None = None) -> np.ndarray:
    """Weighted matched-beamforming common direction sum_k w_k h_k, normalized.

    Falls back to the dominant singular vector (with a warning) when the
    weighted sum cancels to numerical zero.
    """
    M, K = H_hat.shape
    if weights is None:
        w = np.full(K, 1.0 / math.sqrt(M * K))
    else:
        w = np.asarray([float(x) for x in weights])
        if np.any(w < 0) or np.all(w == 0):
            raise ValueError("weights must be nonnegative and not all zero")
    v = H_hat @ w
    scale = float(np.linalg.norm(H_hat, "fro")) * float(np.max(w))
    if np.linalg.norm(v) <= 1e-12 * max(scale, 1e-300):
        warnings.warn("weighted channel sum cancelled; falling back to SVD common direction")
        return svd_common(H_hat)
    return v / np.linalg.norm(v)


def svd_common(H_hat: np.ndarray) -> np.ndarray:
    """Dominant left singular vector of the channel estimate.

    Phase fixed so the first nonzero entry is real positive.
    """
    if np.linalg.norm(H_hat) == 0:
        raise ValueError("channel estimate is zero")
    U, s, _ = np.linalg.svd(H_hat)
    u = U[:, 0]
    for z in u:
        if abs(z) > 1e-12:
            u = u * (z.conjugate() / abs(z))
            break
    return u


def random_common(M: int) -> np.ndarray:
    """Fixed e1 common direction, sufficient for DoF experiments."""
    e = np.zeros(M, dtype=complex)
    e[0] = 1.0
    return e


def waterfill_powers(gains: Sequence[float], budget: float) -> list[float]:
    """Water-filling: maximize sum log2(1 + q_i g_i) subject to sum q_i = budget."""
    g = np.asarray([float(x) for x in gains])
    if budget <= 0:
        return [0.0] * len(g)
    active = g > 0
    q = np.zeros(len(g))
    idx = np.where(active)[0]
    if len(idx) == 0:
        return list(q)
    inv = 1.0 / g[idx]
    order = np.argsort(inv)
    inv_sorted = inv[order]
    for n in range(len(idx), 0, -1):
        mu = (budget + inv_sorted[:n].sum()) / n
        if mu > inv_sorted[n - 1]:
            levels = np.zeros(len(idx))
            levels[order[:n]] = mu - inv_sorted[:n]
            q[idx] = levels
            return list(q)
    return list(q)


def assemble_solution(
    layout: StreamLayout,
    directions: Mapping[str, np.ndarray],
    split: PowerSplit,
    cfg: SystemConfig,
    H_hat: np.ndarray | None = None,
) -> PrecoderSolution:
    """Scale unit directions into precoders meeting the power budget exactly.

    Multi-decoder (common) streams share (1-tau)P; private streams share
    tau*P equally or by water-filling over the effective gains
    |h_k^H d_k|^2 / sigma_k^2 (requires H_hat).  Layouts without a common
    stream put the whole budget on the private streams.
    """
    common = [s.label for s in layout.streams if len(s.users) > 1]
    privates = [s for s in layout.streams if len(s.users) == 1]
    for s in layout.streams:
        if s.label not in directions:
            raise ValueError(f"missing direction for stream {s.label}")
    precoders: dict[str, np.ndarray] = {}
    P = cfg.P
    p_common = split.common_power(P) if common else 0.0
    p_private = P - p_common if common else P
    for lab in common:
        d = np.asarray(directions[lab])
        share = p_common / len(common)
        precoders[lab] = np.sqrt(share) * d / np.linalg.norm(d)
    if privates:
        if split.private_policy == "equal":
            q = [p_private / len(privates)] * len(privates)
        else:
            if H_hat is None:
                raise ValueError("water-filling requires the channel estimate")
            gains = []
            for s in privates:
                (owner,) = s.owners
                d = np.asarray(directions[s.label])
                d = d / np.linalg.norm(d)
                gains.append(abs(np.vdot(H_hat[:, owner - 1], d)) ** 2 / cfg.noise_var[owner - 1])
            q = waterfill_powers(gains, p_private)
        for s, qq in zip(privates, q):
            d = np.asarray(directions[s.label])
            precoders[s.label] = np.sqrt(qq) * d / np.linalg.norm(d)
    return PrecoderSolution(precoders=precoders).validate(layout, P)


def optimize_tau(
    layout: StreamLayout,
    directions: Mapping[str, np.ndarray],
    channels: np.ndarray | Sequence[np.ndarray],
    cfg: SystemConfig,
    objective: str = "sum-rate",
    private_policy: str = "equal",
    H_hat: np.ndarray | None = None,
    objective_fn: Callable[[PrecoderSolution], float] | None = None,
    coarse: int = 21,
    xtol: float = 1e-4,
) -> tuple[float, float]:
    """Scalar search for the private-power fraction tau maximizing an objective.

    ``channels`` is one channel matrix or an ensemble (objective averaged
    over it); ``objective`` is 'sum-rate' or 'min-rate', or supply a custom
    ``objective_fn(solution)``.  A coarse scan seeds a golden-section
    refinement to xtol (the objective need not be unimodal over the whole
    interval, so the scan picks the bracket first).  Returns (tau*, value).
    """
    from .rates import rate_downlink

    if objective_fn is None:
        if objective not in ("sum-rate", "min-rate"):
            raise ValueError(f"unknown tau objective {objective!r}")
        ensemble = [channels] if isinstance(channels, np.ndarray) else list(channels)

        def objective_fn(sol: PrecoderSolution) -> float:
            vals = []
            for H in ensemble:
                rep = rate_downlink(layout, sol, H, cfg)
                vals.append(rep.sum_rate if objective == "sum-rate" else rep.min_rate)
            return float(np.mean(vals))

    def f(tau: float) -> float:
        sol = assemble_solution(layout, directions, PowerSplit(tau, private_policy), cfg, H_hat)
        return objective_fn(sol)

    taus = np.linspace(0.0, 1.0, coarse)
    vals = [f(t) for t in taus]
    i = int(np.argmax(vals))
    lo = taus[max(0, i - 1)]
    hi = taus[min(coarse - 1, i + 1)]
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while (b - a) > xtol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    candidates = [(vals[i], taus[i]), (fc, c), (fd, d)]
    best_val, best_tau = max(candidates, key=lambda p: p[0])
    return float(best_tau), float(best_val)
