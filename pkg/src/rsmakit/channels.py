"""Channel generation: Rayleigh ensembles, CSIT error models, deterministic geometries.

All sampling is reproducible: one counter-based generator per trial, derived
from (base seed, trial index), so serial and parallel runs agree.  Complex
Gaussians are drawn as two independent real Gaussians of half variance.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, TextIO, Union

import numpy as np
from scipy.special import j0

SPEED_OF_LIGHT = 299792458.0

__all__ = [
    "Perfect",
    "ScaledError",
    "BoundedError",
    "Jakes",
    "ChannelPair",
    "ChannelEnsembleSpec",
    "ChannelSampler",
    "trial_rng",
    "sample_rayleigh",
    "apply_scaled_error",
    "jakes_correlation",
    "sample_jakes_pair",
    "deterministic_two_user",
    "theta_from_rho",
    "dump_matrix",
    "load_matrix",
    "dump_channel_pair",
    "load_channel_pair",
]


@dataclass(frozen=True)
class Perfect:
    kind: str = field(default="perfect", init=False)


@dataclass(frozen=True)
class ScaledError:
    """CSIT error variance scales as P^{-alpha} at reference power P_ref."""

    alpha: float
    p_ref: float
    kind: str = field(default="scaled_error", init=False)


@dataclass(frozen=True)
class BoundedError:
    """Per-user error confined to a sphere of radius delta_k."""

    delta: tuple[float, ...]
    kind: str = field(default="bounded_error", init=False)


@dataclass(frozen=True)
class Jakes:
    """Outdated CSIT with time-correlation epsilon from the Jakes model."""

    epsilon: float
    kind: str = field(default="jakes", init=False)

    def __post_init__(self):
        if not -1.0 <= self.epsilon <= 1.0:
            raise ValueError("Jakes correlation must lie in [-1, 1]")


ChannelModel = Union[Perfect, ScaledError, BoundedError, Jakes]


@dataclass(frozen=True)
class ChannelPair:
    """True channel H, transmitter-side estimate H_hat, and the error model used."""

    H: np.ndarray
    H_hat: np.ndarray
    model: ChannelModel
    seed: int | None = None

    def __post_init__(self):
        if self.H.shape != self.H_hat.shape:
            raise ValueError("H and H_hat dimensions disagree")
        if isinstance(self.model, Perfect) and not np.array_equal(self.H, self.H_hat):
            raise ValueError("Perfect model requires H == H_hat exactly")


@dataclass(frozen=True)
class ChannelEnsembleSpec:
    """Per-user channel variances plus Monte-Carlo bookkeeping."""

    sigma2: tuple[float, ...]
    trials: int = 1
    base_seed: int = 0

    def __post_init__(self):
        if any(not s > 0 for s in self.sigma2):
            raise ValueError("channel variances must be > 0")
        if self.trials < 1:
            raise ValueError("trial count must be >= 1")

    @classmethod
    def uniform(cls, K: int, sigma2: float = 1.0, trials: int = 1, base_seed: int = 0):
        return cls(tuple(float(sigma2) for _ in range(K)), trials, base_seed)


def trial_rng(base_seed: int, trial: int = 0, stream: int = 0) -> np.random.Generator:
    """Counter-based generator derived from (base seed, trial index, stream).

    Distinct (trial, stream) pairs give independent streams, so parallel and
    serial trial evaluation produce identical draws.
    """
    key = np.random.SeedSequence((base_seed, trial, stream)).generate_state(2, np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _complex_gaussian(rng: np.random.Generator, shape, var: np.ndarray | float) -> np.ndarray:
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return np.sqrt(np.asarray(var) / 2.0) * (re + 1j * im)


def sample_rayleigh(spec: ChannelEnsembleSpec, M: int, K: int, trial: int = 0) -> np.ndarray:
    """i.i.d. circular complex Gaussian M-by-K channel; column k has variance sigma2[k]."""
    if len(spec.sigma2) != K:
        raise ValueError(f"spec has {len(spec.sigma2)} variances, K={K}")
    rng = trial_rng(spec.base_seed, trial)
    var = np.asarray(spec.sigma2)[None, :]
    return _complex_gaussian(rng, (M, K), var)


def apply_scaled_error(
    H_hat: np.ndarray,
    alpha: float,
    P: float,
    rng: np.random.Generator,
    sigma2: Sequence[float] | float = 1.0,
) -> ChannelPair:
    """Attach a P^{-alpha}-variance estimation error to an estimate.

    The raw estimate is rescaled so the total channel variance per entry
    stays sigma2: the stored estimate has variance sigma2*(1 - e) and the
    error variance sigma2*e with e = min(1, P^-alpha).
    """
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    if not P > 0:
        raise ValueError("P must be > 0")
    M, K = H_hat.shape
    e = min(1.0, float(P) ** (-float(alpha)))
    var = np.full(K, float(sigma2)) if np.isscalar(sigma2) else np.asarray([float(s) for s in sigma2])
    H_hat_scaled = H_hat * np.sqrt(1.0 - e)
    err = _complex_gaussian(rng, (M, K), e * var[None, :])
    H = H_hat_scaled + err
    return ChannelPair(H=H, H_hat=H_hat_scaled, model=ScaledError(alpha=float(alpha), p_ref=float(P)))


def jakes_correlation(v: float, f_c: float, T: float) -> float:
    """Time correlation J0(2 pi f_D T) with Doppler f_D = v f_c / c (v in m/s)."""
    if v < 0:
        raise ValueError("speed must be >= 0")
    f_d = v * f_c / SPEED_OF_LIGHT
    return float(j0(2.0 * np.pi * f_d * T))


def sample_jakes_pair(
    v: float,
    f_c: float,
    T: float,
    spec: ChannelEnsembleSpec,
    M: int,
    K: int,
    trial: int = 0,
) -> ChannelPair:
    """Outdated-CSIT pair: H = eps*H_prev + sqrt(1-eps^2)*E, estimate = H_prev."""
    eps = jakes_correlation(v, f_c, T)
    rng = trial_rng(spec.base_seed, trial)
    var = np.asarray(spec.sigma2)[None, :]
    H_prev = _complex_gaussian(rng, (M, K), var)
    E = _complex_gaussian(rng, (M, K), var)
    if eps == 1.0:
        H = H_prev.copy()
    else:
        H = eps * H_prev + np.sqrt(1.0 - eps**2) * E
    return ChannelPair(H=H, H_hat=H_prev, model=Jakes(epsilon=eps), seed=spec.base_seed)


def deterministic_two_user(gamma_db: float, theta: float) -> tuple[np.ndarray, float]:
    """Two-user geometry h1 = [1,1]/sqrt2, h2 = gamma*[1, e^{j theta}]^H / sqrt2.

    Returns (H, rho) with H of shape (2, 2) (columns are users) and the
    subspace separation rho = 1 - |h1^H h2|^2 / (|h1|^2 |h2|^2), which is
    invariant to gamma.
    """
    gamma = 10.0 ** (gamma_db / 20.0)
    h1 = np.array([1.0, 1.0], dtype=complex) / np.sqrt(2.0)
    h2 = gamma * np.conj(np.array([1.0, np.exp(1j * theta)])) / np.sqrt(2.0)
    H = np.stack([h1, h2], axis=1)
    num = abs(np.vdot(h1, h2)) ** 2
    den = (np.linalg.norm(h1) ** 2) * (np.linalg.norm(h2) ** 2)
    rho = float(1.0 - num / den)
    return H, rho


def theta_from_rho(rho: float) -> float:
    """Invert rho(theta) = (1 - cos theta)/2 on (0, pi]."""
    if not 0.0 <= rho <= 1.0:
        raise ValueError("rho must lie in [0, 1]")
    return float(np.arccos(1.0 - 2.0 * rho))


@dataclass(frozen=True)
class ChannelSampler:
    """Seeded factory of (H, H_hat) pairs for one ensemble and error model."""

    spec: ChannelEnsembleSpec
    M: int
    K: int
    model: ChannelModel = Perfect()

    def pair(self, trial: int = 0) -> ChannelPair:
        if isinstance(self.model, Perfect):
            H = sample_rayleigh(self.spec, self.M, self.K, trial)
            return ChannelPair(H=H, H_hat=H.copy(), model=self.model, seed=self.spec.base_seed)
        if isinstance(self.model, ScaledError):
            H_hat_raw = sample_rayleigh(self.spec, self.M, self.K, trial)
            rng = trial_rng(self.spec.base_seed, trial, stream=1)
            return apply_scaled_error(
                H_hat_raw, self.model.alpha, self.model.p_ref, rng, sigma2=self.spec.sigma2
            )
        if isinstance(self.model, Jakes):
            raise ValueError("use sample_jakes_pair with explicit mobility parameters")
        if isinstance(self.model, BoundedError):
            # bounded errors are evaluated by worst-case sampling, not drawn here
            H = sample_rayleigh(self.spec, self.M, self.K, trial)
            return ChannelPair(H=H.copy(), H_hat=H, model=self.model, seed=self.spec.base_seed)
        raise ValueError(f"unknown model {self.model}")

    def conditional(self, H_hat: np.ndarray, trial: int) -> np.ndarray:
        """Draw a true channel consistent with H_hat under the error model."""
        if isinstance(self.model, Perfect):
            return H_hat.copy()
        if isinstance(self.model, ScaledError):
            e = min(1.0, self.model.p_ref ** (-self.model.alpha))
            rng = trial_rng(self.spec.base_seed, trial, stream=2)
            var = e * np.asarray(self.spec.sigma2)[None, :]
            return H_hat + _complex_gaussian(rng, H_hat.shape, var)
        raise ValueError(f"conditional draws unsupported for {self.model}")


# -- plain-text matrix dumps (regression fixtures) ---------------------------


def _model_tag(model: ChannelModel) -> str:
    if isinstance(model, Perfect):
        return "perfect"
    if isinstance(model, ScaledError):
        return f"scaled_error alpha={model.alpha!r} p_ref={model.p_ref!r}"
    if isinstance(model, BoundedError):
        return "bounded_error " + " ".join(repr(d) for d in model.delta)
    if isinstance(model, Jakes):
        return f"jakes epsilon={model.epsilon!r}"
    raise ValueError(model)


def _parse_model(tag: str) -> ChannelModel:
    parts = tag.split()
    if parts[0] == "perfect":
        return Perfect()
    if parts[0] == "scaled_error":
        kv = dict(p.split("=") for p in parts[1:])
        return ScaledError(alpha=float(kv["alpha"]), p_ref=float(kv["p_ref"]))
    if parts[0] == "bounded_error":
        return BoundedError(delta=tuple(float(x) for x in parts[1:]))
    if parts[0] == "jakes":
        kv = dict(p.split("=") for p in parts[1:])
        return Jakes(epsilon=float(kv["epsilon"]))
    raise ValueError(f"unknown model tag {tag!r}")


def _write_matrix(fh: TextIO, name: str, A: np.ndarray) -> None:
    fh.write(f"{name}\n")
    for row in A:
        fh.write(" ".join(repr(complex(z)) for z in row) + "\n")


def _read_matrix(lines: list[str], start: int, rows: int) -> tuple[np.ndarray, int]:
    data = []
    for i in range(rows):
        data.append([complex(tok) for tok in lines[start + i].split()])
    return np.array(data, dtype=complex), start + rows


def dump_matrix(A: np.ndarray, target: Union[str, Path, TextIO], name: str = "H", model: str = "raw") -> None:
    """Text dump: header with dimensions and model, one complex entry per token, row-major."""
    own = isinstance(target, (str, Path))
    fh = open(target, "w") if own else target
    try:
        fh.write(f"M {A.shape[0]}\nK {A.shape[1]}\nmodel {model}\n")
        _write_matrix(fh, name, A)
    finally:
        if own:
            fh.close()


def load_matrix(source: Union[str, Path, TextIO]) -> tuple[np.ndarray, str]:
    own = isinstance(source, (str, Path))
    fh = open(source) if own else source
    try:
        lines = [ln.rstrip("\n") for ln in fh.readlines()]
    finally:
        if own:
            fh.close()
    M = int(lines[0].split()[1])
    A, _ = _read_matrix(lines, 4, M)
    return A, lines[2].removeprefix("model ").strip()


def dump_channel_pair(pair: ChannelPair, target: Union[str, Path, TextIO]) -> None:
    own = isinstance(target, (str, Path))
    fh = open(target, "w") if own else target
    try:
        M, K = pair.H.shape
        fh.write(f"M {M}\nK {K}\nmodel {_model_tag(pair.model)}\n")
        _write_matrix(fh, "H", pair.H)
        _write_matrix(fh, "H_hat", pair.H_hat)
    finally:
        if own:
            fh.close()


def load_channel_pair(source: Union[str, Path, TextIO]) -> ChannelPair:
    own = isinstance(source, (str, Path))
    fh = open(source) if own else source
    try:
        lines = [ln.rstrip("\n") for ln in fh.readlines()]
    finally:
        if own:
            fh.close()
    M = int(lines[0].split()[1])
    model = _parse_model(lines[2].removeprefix("model ").strip())
    assert lines[3] == "H"
    H, pos = _read_matrix(lines, 4, M)
    assert lines[pos] == "H_hat"
    H_hat, _ = _read_matrix(lines, pos + 1, M)
    return ChannelPair(H=H, H_hat=H_hat, model=model)
