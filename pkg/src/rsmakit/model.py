"""Core data model: system configuration, stream layouts, precoder solutions, rate reports.

Users are indexed 1..K throughout.  A stream layout captures the
message-to-stream mapping of a multiple-access scheme: which streams exist,
which users decode each stream, whose sub-messages each stream carries, and
the per-user SIC decoding order.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "Scheme",
    "SystemConfig",
    "Stream",
    "StreamLayout",
    "PrecoderSolution",
    "RateReport",
    "ConfigError",
    "LayoutError",
    "validate_config",
    "build_stream_layout",
    "GENERALIZED_RS_MAX_K",
]

# 2^K - 1 streams; receiver needs 2^(K-1) - 1 SIC layers, so cap K by default.
GENERALIZED_RS_MAX_K = 6


class ConfigError(ValueError):
    """A system configuration violates one of its invariants."""


class LayoutError(ValueError):
    """A stream layout request is inconsistent (bad grouping, order, or size)."""


class Scheme(str, Enum):
    ONE_LAYER_RS = "one_layer_rs"
    TWO_LAYER_HRS = "two_layer_hrs"
    GENERALIZED_RS = "generalized_rs"
    RS_CMD = "rs_cmd"
    SDMA = "sdma"
    NOMA = "noma"
    OMA = "oma"
    MULTICAST = "multicast"


@dataclass(frozen=True)
class SystemConfig:
    """Transmitter/user-side parameters shared by all operations.

    M: transmit antennas, K: users, P: total transmit power (linear),
    noise_var[k-1]: per-user noise variance (linear), weights: per-user
    utility weights, qos: per-user rate thresholds in bit/s/Hz.
    """

    M: int
    K: int
    P: float
    noise_var: tuple[float, ...]
    weights: tuple[float, ...]
    qos: tuple[float, ...]

    @classmethod
    def create(
        cls,
        M: int,
        K: int,
        P: float,
        noise_var: float | Sequence[float] = 1.0,
        weights: float | Sequence[float] = 1.0,
        qos: float | Sequence[float] = 0.0,
    ) -> "SystemConfig":
        """Build a config, broadcasting scalar noise/weights/qos over users."""

        def _broadcast(x, name):
            if np.isscalar(x):
                return tuple(float(x) for _ in range(K))
            vals = tuple(float(v) for v in x)
            if len(vals) != K:
                raise ConfigError(f"{name} must have K={K} entries, got {len(vals)}")
            return vals

        cfg = cls(
            M=int(M),
            K=int(K),
            P=float(P),
            noise_var=_broadcast(noise_var, "noise_var"),
            weights=_broadcast(weights, "weights"),
            qos=_broadcast(qos, "qos"),
        )
        return validate_config(cfg)

    def snr_db(self, k: int = 1) -> float:
        """Transmit SNR of user k in dB (P over its noise variance)."""
        return 10.0 * np.log10(self.P / self.noise_var[k - 1])


def validate_config(cfg: SystemConfig) -> SystemConfig:
    """Return cfg unchanged if valid, else raise naming the first violated invariant."""
    if cfg.M < 1:
        raise ConfigError("M>=1 required")
    if cfg.K < 2:
        raise ConfigError("K>=2 required")
    if not cfg.P > 0:
        raise ConfigError("P>0 required")
    if len(cfg.noise_var) != cfg.K:
        raise ConfigError(f"noise_var must have K={cfg.K} entries")
    if any(not v > 0 for v in cfg.noise_var):
        raise ConfigError("noise variances must be > 0")
    if len(cfg.weights) != cfg.K:
        raise ConfigError(f"weights must have K={cfg.K} entries")
    if any(w < 0 for w in cfg.weights):
        raise ConfigError("weights must be nonnegative")
    if all(w == 0 for w in cfg.weights):
        raise ConfigError("weights must not all be zero")
    if len(cfg.qos) != cfg.K:
        raise ConfigError(f"qos must have K={cfg.K} entries")
    if any(r < 0 for r in cfg.qos):
        raise ConfigError("qos thresholds must be >= 0")
    return cfg


@dataclass(frozen=True)
class Stream:
    """One transmitted stream.

    users:  the set of users that decode this stream.
    owners: the users whose sub-messages the stream carries (the rate of the
            stream is divided among its owners).  For most schemes owners ==
            users; for NOMA and RS-CMD a stream decoded by several users may
            carry a single user's message.
    """

    label: str
    users: frozenset[int]
    owners: frozenset[int]

    @property
    def is_common(self) -> bool:
        """True when the stream's rate is shared among several owners."""
        return len(self.owners) > 1


@dataclass(frozen=True)
class StreamLayout:
    scheme: Scheme
    streams: tuple[Stream, ...]
    decode_order: Mapping[int, tuple[str, ...]]
    K: int
    grouping: tuple[frozenset[int], ...] | None = None

    def __post_init__(self):
        _validate_layout(self)

    def stream(self, label: str) -> Stream:
        for s in self.streams:
            if s.label == label:
                return s
        raise KeyError(label)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(s.label for s in self.streams)

    def common_streams(self) -> tuple[Stream, ...]:
        return tuple(s for s in self.streams if s.is_common)

    def private_stream_of(self, k: int) -> Stream | None:
        """The stream decoded only by user k carrying only k's message, if any."""
        for s in self.streams:
            if s.users == frozenset({k}) and s.owners == frozenset({k}):
                return s
        return None

    def describe(self) -> str:
        """Human-readable text form: streams, member lists, per-user orders."""
        lines = [f"scheme {self.scheme.value}  K {self.K}"]
        for s in self.streams:
            users = ",".join(str(u) for u in sorted(s.users))
            owners = ",".join(str(u) for u in sorted(s.owners))
            lines.append(f"stream {s.label}  decoders {{{users}}}  owners {{{owners}}}")
        for k in range(1, self.K + 1):
            order = " -> ".join(self.decode_order[k])
            lines.append(f"user {k} decodes {order}")
        return "\n".join(lines)


def _validate_layout(layout: StreamLayout) -> None:
    labels = [s.label for s in layout.streams]
    if len(set(labels)) != len(labels):
        raise LayoutError("stream labels must be unique")
    by_label = {s.label: s for s in layout.streams}
    for k in range(1, layout.K + 1):
        if k not in layout.decode_order:
            raise LayoutError(f"user {k} has no decode order")
        seen = set()
        for lab in layout.decode_order[k]:
            if lab not in by_label:
                raise LayoutError(f"decode order of user {k} names unknown stream {lab}")
            if lab in seen:
                raise LayoutError(f"user {k} decodes stream {lab} twice")
            seen.add(lab)
            if k not in by_label[lab].users:
                raise LayoutError(f"user {k} decodes stream {lab} it does not belong to")
    # every decoder actually lists the stream
    for s in layout.streams:
        for k in s.users:
            if s.label not in layout.decode_order[k]:
                raise LayoutError(f"stream {s.label} missing from decode order of user {k}")


def _check_grouping(grouping: Sequence[Iterable[int]], K: int) -> tuple[frozenset[int], ...]:
    groups = tuple(frozenset(int(u) for u in g) for g in grouping)
    if any(len(g) == 0 for g in groups):
        raise LayoutError("grouping contains an empty group")
    union: set[int] = set()
    total = 0
    for g in groups:
        union |= g
        total += len(g)
    if union != set(range(1, K + 1)) or total != K:
        raise LayoutError("grouping is not a partition of {1..K}")
    return groups


def _subset_label(subset: Iterable[int]) -> str:
    return "s" + "".join(str(u) for u in sorted(subset))


def build_stream_layout(
    scheme: Scheme | str,
    K: int,
    grouping: Sequence[Iterable[int]] | None = None,
    orders: Sequence[int] | Mapping[int, Sequence[str]] | None = None,
) -> StreamLayout:
    """Construct the stream layout of a scheme for K users.

    grouping is required for TwoLayerHRS and for NOMA with more than one
    group.  ``orders`` is scheme specific: for NOMA a user permutation with
    the strongest (first-cancelled-from, last-decoded-by-others... see below)
    user first; for GeneralizedRS an optional mapping from stream order l to
    the tie-break sequence of l-order labels; for RS-CMD a user sequence
    fixing the common-stream decode order.

    NOMA convention: ``orders`` lists users by descending (estimated) channel
    strength.  The stream of the j-th listed user is decoded by users 1..j of
    the list; each user decodes the weaker users' streams first, then its own.
    """
    scheme = Scheme(scheme)
    K = int(K)
    if K < 2:
        raise LayoutError("K>=2 required")
    all_users = frozenset(range(1, K + 1))

    if scheme is Scheme.ONE_LAYER_RS:
        streams = [Stream("c", all_users, all_users)]
        streams += [Stream(f"p{k}", frozenset({k}), frozenset({k})) for k in range(1, K + 1)]
        order = {k: ("c", f"p{k}") for k in range(1, K + 1)}
        return StreamLayout(scheme, tuple(streams), order, K)

    if scheme is Scheme.SDMA:
        streams = [Stream(f"p{k}", frozenset({k}), frozenset({k})) for k in range(1, K + 1)]
        order = {k: (f"p{k}",) for k in range(1, K + 1)}
        return StreamLayout(scheme, tuple(streams), order, K)

    if scheme is Scheme.OMA:
        streams = [Stream("p1", frozenset({1}), frozenset({1}))]
        order = {k: (("p1",) if k == 1 else ()) for k in range(1, K + 1)}
        # users 2..K decode nothing
        return StreamLayout(scheme, tuple(streams), {k: tuple(v) for k, v in order.items()}, K)

    if scheme is Scheme.MULTICAST:
        streams = [Stream("c", all_users, all_users)]
        order = {k: ("c",) for k in range(1, K + 1)}
        return StreamLayout(scheme, tuple(streams), order, K)

    if scheme is Scheme.TWO_LAYER_HRS:
        if grouping is None:
            raise LayoutError("TwoLayerHRS requires a grouping")
        groups = _check_grouping(grouping, K)
        streams = [Stream("c", all_users, all_users)]
        group_of: dict[int, int] = {}
        for i, g in enumerate(groups, start=1):
            streams.append(Stream(f"g{i}", g, g))
            for u in g:
                group_of[u] = i
        streams += [Stream(f"p{k}", frozenset({k}), frozenset({k})) for k in range(1, K + 1)]
        order = {k: ("c", f"g{group_of[k]}", f"p{k}") for k in range(1, K + 1)}
        return StreamLayout(scheme, tuple(streams), order, K, grouping=groups)

    if scheme is Scheme.GENERALIZED_RS:
        if K > GENERALIZED_RS_MAX_K:
            raise LayoutError(
                f"GeneralizedRS capped at K={GENERALIZED_RS_MAX_K} (2^K-1 streams)"
            )
        level_labels: dict[int, list[str]] = {}
        subsets_by_label: dict[str, frozenset[int]] = {}
        for l in range(K, 0, -1):
            labs = []
            for subset in itertools.combinations(range(1, K + 1), l):
                lab = _subset_label(subset)
                subsets_by_label[lab] = frozenset(subset)
                labs.append(lab)
            labs.sort()
            if orders is not None and isinstance(orders, Mapping) and l in orders:
                custom = list(orders[l])
                if sorted(custom) != sorted(labs):
                    raise LayoutError(f"orders for level {l} is not a permutation of its streams")
                labs = custom
            level_labels[l] = labs
        streams = []
        for l in range(K, 0, -1):
            for lab in level_labels[l]:
                streams.append(Stream(lab, subsets_by_label[lab], subsets_by_label[lab]))
        order = {}
        for k in range(1, K + 1):
            seq: list[str] = []
            for l in range(K, 0, -1):
                seq += [lab for lab in level_labels[l] if k in subsets_by_label[lab]]
            order[k] = tuple(seq)
        return StreamLayout(scheme, tuple(streams), order, K)

    if scheme is Scheme.RS_CMD:
        if orders is None:
            user_seq = list(range(1, K + 1))
        else:
            user_seq = [int(u) for u in orders]  # type: ignore[union-attr]
            if sorted(user_seq) != list(range(1, K + 1)):
                raise LayoutError("RS-CMD orders must be a permutation of users")
        # all users decode all common streams (decoder groups not optimized)
        streams = [Stream(f"c{j}", all_users, frozenset({j})) for j in user_seq]
        streams += [Stream(f"p{k}", frozenset({k}), frozenset({k})) for k in range(1, K + 1)]
        order = {k: tuple(f"c{j}" for j in user_seq) + (f"p{k}",) for k in range(1, K + 1)}
        return StreamLayout(scheme, tuple(streams), order, K)

    if scheme is Scheme.NOMA:
        if grouping is None:
            groups = (all_users,)
        else:
            groups = _check_grouping(grouping, K)
        if orders is None:
            user_seq = list(range(1, K + 1))
        else:
            user_seq = [int(u) for u in orders]  # type: ignore[union-attr]
            if sorted(user_seq) != list(range(1, K + 1)):
                raise LayoutError("NOMA orders must be a permutation of users")
        streams = []
        order: dict[int, list[str]] = {k: [] for k in range(1, K + 1)}
        for g in groups:
            seq = [u for u in user_seq if u in g]  # strongest first within the group
            for j, u in enumerate(seq):
                decoders = frozenset(seq[: j + 1])
                streams.append(Stream(f"n{u}", decoders, frozenset({u})))
            for j, u in enumerate(seq):
                # u decodes the weaker users' streams first, then its own
                order[u] = [f"n{v}" for v in reversed(seq[j:])]
        streams.sort(key=lambda s: (-len(s.users), s.label))
        return StreamLayout(
            scheme,
            tuple(streams),
            {k: tuple(v) for k, v in order.items()},
            K,
            grouping=groups if grouping is not None else None,
        )

    raise LayoutError(f"unknown scheme {scheme}")


def noma_order_from_channel(H_hat: np.ndarray) -> tuple[int, ...]:
    """Default NOMA user order: descending estimated channel norm."""
    norms = np.linalg.norm(H_hat, axis=0)
    return tuple(int(i) + 1 for i in np.argsort(-norms, kind="stable"))


def enumerate_generalized_orders(K: int):
    """All within-level decoding orders for generalized RS (exhaustive search).

    Yields one ``orders`` mapping per combination of per-level stream
    permutations (the K- and 1-order levels admit a single order each).
    The count grows as the product of binom(K, l)! factorials, so this is
    only practical for K = 3; larger K must fix orders explicitly.
    """
    if K > 3:
        raise LayoutError("order enumeration is exhaustive only for K<=3")
    levels = {}
    for l in range(2, K):
        labs = sorted(
            _subset_label(c) for c in itertools.combinations(range(1, K + 1), l)
        )
        levels[l] = list(itertools.permutations(labs))
    if not levels:
        yield None
        return
    keys = sorted(levels)
    for combo in itertools.product(*(levels[l] for l in keys)):
        yield {l: list(perm) for l, perm in zip(keys, combo)}


@dataclass(frozen=True)
class PrecoderSolution:
    """Per-stream precoding vectors plus the common-rate allocation vector.

    ``common_alloc`` maps (common-stream label, user) to the rate share (in
    bit/s/Hz) granted to that user out of the stream's achievable rate.
    """

    precoders: Mapping[str, np.ndarray]
    common_alloc: Mapping[tuple[str, int], float] = field(default_factory=dict)

    def total_power(self) -> float:
        return float(sum(np.vdot(p, p).real for p in self.precoders.values()))

    def validate(self, layout: StreamLayout, P: float, tol: float = 1e-9) -> "PrecoderSolution":
        for s in layout.streams:
            if s.label not in self.precoders:
                raise ConfigError(f"missing precoder for stream {s.label}")
        used = self.total_power()
        if used > P * (1.0 + tol) + tol * P:
            raise ConfigError(f"total precoder power {used:.6g} exceeds budget {P:.6g}")
        for (lab, k), c in self.common_alloc.items():
            if c < 0:
                raise ConfigError(f"common-rate share for ({lab},{k}) is negative")
        return self


@dataclass(frozen=True)
class RateReport:
    """Achievable rates of one (layout, precoders, channel) evaluation.

    stream_rate[s] is the rate at which stream s is decodable by every user
    in its decoder set (the minimum of the per-user decode rates).
    """

    stream_rate: Mapping[str, float]
    per_user_decode_rate: Mapping[tuple[str, int], float]
    common_alloc: Mapping[tuple[str, int], float]
    totals: Mapping[int, float]
    sum_rate: float
    min_rate: float
    stderr: Mapping[int, float] | None = None

    def user_total(self, k: int) -> float:
        return self.totals[k]

    def to_csv_rows(self) -> list[dict]:
        """One row per (stream, user) decode rate plus summary rows."""
        rows = []
        for (lab, k), r in sorted(self.per_user_decode_rate.items()):
            rows.append({"kind": "decode", "stream": lab, "user": k, "rate": r})
        for lab, r in sorted(self.stream_rate.items()):
            rows.append({"kind": "stream", "stream": lab, "user": "", "rate": r})
        for (lab, k), c in sorted(self.common_alloc.items()):
            rows.append({"kind": "alloc", "stream": lab, "user": k, "rate": c})
        for k, r in sorted(self.totals.items()):
            rows.append({"kind": "total", "stream": "", "user": k, "rate": r})
        rows.append({"kind": "sum", "stream": "", "user": "", "rate": self.sum_rate})
        rows.append({"kind": "min", "stream": "", "user": "", "rate": self.min_rate})
        return rows
