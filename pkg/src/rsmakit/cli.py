"""Configuration-driven experiment runner.

Subcommands cover the seven analysis recipes plus single-shot ``rate`` and
``solve`` runs and the closed-form ``dof`` query.  Parameters come from an
optional flat key=value config file (dotted section keys) overridden by
``--set key=value`` flags; unknown keys are rejected.  Every run directory
receives the recipe CSVs, a resolved-config echo, a manifest, and (unless
disabled) a rendered figure.

Exit codes: 0 success, 2 config error, 3 numerical failure, 4 infeasible.
"""

from __future__ import annotations

import argparse
import csv
import difflib
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import DoFQuery, RECIPES, dof_closed_form, run_experiment
from .channels import ChannelEnsembleSpec, deterministic_two_user, sample_rayleigh
from .figures import render_recipe_figure
from .model import ConfigError, Scheme, SystemConfig, build_stream_layout
from .optimizer import OptimizeSpec, solve, solve_noma_best
from .precoders import PowerSplit, assemble_solution, mbf_common, rzf_directions, svd_common, zf_directions
from .rates import rate_downlink, report_to_csv

ENV_OUT = "RSMAKIT_OUT"

RECIPE_DOC = {
    "rate": "single-shot rate report for a scheme, channel, and closed-form precoder",
    "solve": "one precoder optimization (WSR or MMF) with trace and constraint report",
    "rate-region": "two-user rate-region boundary sweep over weight pairs",
    "esr-vs-alpha": "ergodic sum rate versus CSIT scaling factor",
    "mmf-vs-snr": "max-min rate and common-power fraction versus SNR",
    "dof-slope": "empirical high-SNR slope of closed-form RSMA and ZF-SDMA",
    "overloaded-qos": "overloaded WSR with a QoS ladder growing along the SNR grid",
    "uplink-region": "two-user MAC pentagon and rate-split points on the dominant face",
    "oper-region": "preferred-scheme map over the (rho, gamma) channel-geometry grid",
}

RECIPE_KEYS = {
    "rate": {"scheme", "m", "k", "snr_db", "gamma_db", "theta", "seed", "tau", "private", "common", "sigma2"},
    "solve": {"scheme", "objective", "m", "k", "snr_db", "weights", "qos", "seed", "gamma_db", "theta", "restarts", "max_iters", "tol", "sigma2"},
    "rate-region": {"snr_db", "n_weights", "seed", "alpha", "trials", "schemes", "m_samples", "restarts", "max_iters", "tol", "sigma2"},
    "esr-vs-alpha": {"m", "k", "snr_db", "alpha_grid", "trials", "eval_samples", "seed", "schemes", "m_samples", "restarts", "max_iters", "tol", "sigma2"},
    "mmf-vs-snr": {"m", "k", "alpha", "snr_grid", "trials", "seed", "schemes", "m_samples", "restarts", "max_iters", "tol", "sigma2"},
    "dof-slope": {"m", "k", "alpha", "snr_grid", "trials", "m_samples", "seed", "schemes", "sigma2"},
    "overloaded-qos": {"m", "k", "snr_grid", "qos_ladder", "trials", "seed", "sigma2", "schemes", "slope_from_db", "restarts", "max_iters", "tol"},
    "uplink-region": {"p1", "p2", "h_abs", "sigma2", "n_face"},
    "oper-region": {"grid", "rho_grid", "gamma_grid", "weights", "epsilon", "snr_db", "restarts", "max_iters", "tol", "seed"},
}

GLOBAL_KEYS = {"recipe", "output.dir", "output.figures", "seed"}


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _parse_value(raw: str):
    raw = raw.strip()
    low = raw.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    if "," in raw:
        return tuple(_parse_value(tok) for tok in raw.split(",") if tok.strip())
    for caster in (int, float):
        try:
            return caster(raw)
        except ValueError:
            continue
    return raw


def load_config_file(path: str) -> dict:
    """Flat key=value config with '#' comments and dotted section keys."""
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise CliError(f"{path}:{lineno}: expected key = value", 2)
            key, raw = line.split("=", 1)
            out[key.strip()] = _parse_value(raw)
    return out


def _check_keys(recipe: str, params: dict) -> None:
    known = RECIPE_KEYS[recipe]
    for key in params:
        if key not in known:
            hint = difflib.get_close_matches(key, sorted(known), n=1)
            extra = f"; did you mean {hint[0]!r}?" if hint else ""
            raise CliError(f"unknown config key {key!r} for recipe {recipe!r}{extra}", 2)


def _resolve_params(recipe: str, args) -> tuple[dict, dict]:
    """Merge config file and --set overrides; returns (params, globals)."""
    file_cfg = load_config_file(args.config) if args.config else {}
    globals_cfg = {}
    params = {}
    for key, value in file_cfg.items():
        if key in GLOBAL_KEYS:
            globals_cfg[key] = value
        elif key.startswith(recipe + "."):
            params[key[len(recipe) + 1 :]] = value
        elif "." in key:
            continue  # other recipes' sections are legal in a shared file
        else:
            params[key] = value
    for item in args.set or []:
        if "=" not in item:
            raise CliError(f"--set expects key=value, got {item!r}", 2)
        key, raw = item.split("=", 1)
        key = key.strip()
        if key in GLOBAL_KEYS:
            globals_cfg[key] = _parse_value(raw)
        else:
            params[key] = _parse_value(raw)
    if getattr(args, "seed", None) is not None:
        params["seed"] = args.seed
    if "recipe" in globals_cfg and globals_cfg["recipe"] != recipe:
        raise CliError(
            f"config file names recipe {globals_cfg['recipe']!r} but {recipe!r} was requested", 2
        )
    _check_keys(recipe, params)
    return params, globals_cfg


def _out_dir(recipe: str, args, globals_cfg: dict) -> Path:
    if args.out:
        base = Path(args.out)
    elif "output.dir" in globals_cfg:
        base = Path(str(globals_cfg["output.dir"]))
    else:
        root = os.environ.get(ENV_OUT, "runs")
        base = Path(root) / recipe
    base.mkdir(parents=True, exist_ok=True)
    return base


def _write_tables(tables: dict, out_dir: Path) -> list[Path]:
    paths = []
    for name, (fields, rows) in tables.items():
        path = out_dir / f"{name}.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=fields)
            writer.writeheader()
            for row in rows:
                writer.writerow(row)
        paths.append(path)
    return paths


def _write_run_metadata(recipe: str, params: dict, globals_cfg: dict, out_dir: Path, wall: float, seed) -> None:
    with open(out_dir / "resolved-config.txt", "w") as fh:
        fh.write(f"recipe = {recipe}\n")
        for key in sorted(params):
            val = params[key]
            if isinstance(val, tuple):
                val = ",".join(str(v) for v in val)
            fh.write(f"{key} = {val}\n")
    with open(out_dir / "manifest.txt", "w") as fh:
        fh.write(f"toolkit rsmakit {__version__}\n")
        fh.write(f"recipe {recipe}\n")
        fh.write(f"seed {seed}\n")
        fh.write(f"wall_time_s {wall:.3f}\n")
        fh.write("rates bit/s/Hz (log2), Gaussian signaling, infinite blocklength\n")


def _figures_enabled(args, globals_cfg: dict) -> bool:
    if args.no_figures:
        return False
    return bool(globals_cfg.get("output.figures", True))


def _channel_for(params: dict, M: int, K: int):
    """Deterministic two-user geometry when gamma/theta are set, else seeded Rayleigh."""
    if "gamma_db" in params or "theta" in params:
        if (M, K) != (2, 2):
            raise CliError("deterministic geometry requires m=2, k=2", 2)
        H, _ = deterministic_two_user(float(params.get("gamma_db", 0.0)), float(params.get("theta", np.pi / 2)))
        return H
    sigma2 = params.get("sigma2", 1.0)
    spec = (
        ChannelEnsembleSpec.uniform(K, sigma2, base_seed=int(params.get("seed", 0)))
        if np.isscalar(sigma2)
        else ChannelEnsembleSpec(tuple(float(s) for s in sigma2), base_seed=int(params.get("seed", 0)))
    )
    return sample_rayleigh(spec, M, K)


def _layout_for(scheme: str, K: int, H=None):
    scheme = scheme.lower()
    mapping = {
        "rsma": Scheme.ONE_LAYER_RS,
        "1-layer-rs": Scheme.ONE_LAYER_RS,
        "sdma": Scheme.SDMA,
        "noma": Scheme.NOMA,
        "oma": Scheme.OMA,
        "multicast": Scheme.MULTICAST,
        "hrs": Scheme.TWO_LAYER_HRS,
        "generalized-rs": Scheme.GENERALIZED_RS,
        "rs-cmd": Scheme.RS_CMD,
    }
    if scheme not in mapping:
        raise CliError(f"unknown scheme {scheme!r}", 2)
    kind = mapping[scheme]
    if kind is Scheme.TWO_LAYER_HRS:
        half = K // 2
        grouping = [range(1, half + 1), range(half + 1, K + 1)]
        return build_stream_layout(kind, K, grouping=grouping)
    if kind is Scheme.NOMA and H is not None:
        from .model import noma_order_from_channel

        return build_stream_layout(kind, K, orders=noma_order_from_channel(H))
    return build_stream_layout(kind, K)


def _cmd_rate(args) -> int:
    params, globals_cfg = _resolve_params("rate", args)
    M = int(params.get("m", 2))
    K = int(params.get("k", 2))
    P = 10.0 ** (float(params.get("snr_db", 20.0)) / 10.0)
    cfg = SystemConfig.create(M, K, P)
    H = _channel_for(params, M, K)
    layout = _layout_for(str(params.get("scheme", "rsma")), K, H)
    tau = float(params.get("tau", 0.5))
    common_kind = str(params.get("common", "svd"))
    private_kind = str(params.get("private", "rzf"))
    dirs = {}
    if private_kind == "zf":
        D = zf_directions(H)
    elif private_kind == "rzf":
        D = rzf_directions(H, cfg=cfg)
    else:
        raise CliError(f"unknown private precoder {private_kind!r}", 2)
    for s in layout.streams:
        if len(s.users) > 1:
            dirs[s.label] = svd_common(H) if common_kind == "svd" else mbf_common(H)
        else:
            (owner,) = s.owners
            dirs[s.label] = D[:, owner - 1]
    sol = assemble_solution(layout, dirs, PowerSplit(tau), cfg)
    report = rate_downlink(layout, sol, H, cfg)
    out_dir = _out_dir("rate", args, globals_cfg)
    t0 = time.time()
    report_to_csv(report, str(out_dir / "rate.csv"))
    with open(out_dir / "layout.txt", "w") as fh:
        fh.write(layout.describe() + "\n")
    _write_run_metadata("rate", params, globals_cfg, out_dir, time.time() - t0, params.get("seed", 0))
    print(f"sum_rate {report.sum_rate:.6f}  min_rate {report.min_rate:.6f}")
    print(f"artifacts in {out_dir}")
    return 0


def _cmd_solve(args) -> int:
    params, globals_cfg = _resolve_params("solve", args)
    M = int(params.get("m", 2))
    K = int(params.get("k", 2))
    P = 10.0 ** (float(params.get("snr_db", 20.0)) / 10.0)
    cfg = SystemConfig.create(
        M,
        K,
        P,
        weights=params.get("weights", 1.0),
        qos=params.get("qos", 0.0),
    )
    H = _channel_for(params, M, K)
    spec = OptimizeSpec(
        objective=str(params.get("objective", "wsr")),
        tol=float(params.get("tol", 1e-4)),
        max_iters=int(params.get("max_iters", 200)),
        restarts=int(params.get("restarts", 3)),
        seed=int(params.get("seed", 0)),
    )
    scheme = str(params.get("scheme", "rsma"))
    if scheme == "noma" and K == 2:
        res = solve_noma_best(cfg, H, spec)
    else:
        res = solve(_layout_for(scheme, K, H), cfg, H, spec)
    out_dir = _out_dir("solve", args, globals_cfg)
    t0 = time.time()
    fields = ["kind", "key", "value"]
    rows = [{"kind": "trace", "key": i, "value": v} for i, v in enumerate(res.trace)]
    rows += [{"kind": "rate", "key": k + 1, "value": r} for k, r in enumerate(res.totals)]
    for lab, p in sorted(res.solution.precoders.items()):
        rows.append({"kind": "power", "key": lab, "value": float(np.vdot(p, p).real)})
    for (lab, k), c in sorted(res.solution.common_alloc.items()):
        rows.append({"kind": "common_alloc", "key": f"{lab}:{k}", "value": c})
    for key, val in sorted(res.constraints.items()):
        if isinstance(val, tuple):
            for k, v in enumerate(val):
                rows.append({"kind": "constraint", "key": f"{key}[{k+1}]", "value": v})
        else:
            rows.append({"kind": "constraint", "key": key, "value": val})
    rows.append({"kind": "objective", "key": spec.objective, "value": res.objective})
    rows.append({"kind": "converged", "key": "", "value": res.converged})
    rows.append({"kind": "feasible", "key": "", "value": res.feasible})
    _write_tables({"solve": (fields, rows)}, out_dir)
    _write_run_metadata("solve", params, globals_cfg, out_dir, time.time() - t0, spec.seed)
    print(f"objective {res.objective:.6f}  converged {res.converged}  feasible {res.feasible}")
    print(f"artifacts in {out_dir}")
    if not res.feasible:
        return 4
    return 0


def _cmd_dof(args) -> int:
    try:
        q = DoFQuery(
            scheme=args.scheme,
            metric=args.metric,
            csit=args.csit,
            M=args.m,
            K=args.k,
            G=args.groups,
            alpha=args.alpha if args.csit == "imperfect" else 1,
        )
        value = dof_closed_form(q)
    except ValueError as exc:
        raise CliError(str(exc), 2) from exc
    print(f"{float(value):g}")
    if args.exact:
        print(f"exact {value}")
    return 0


def _cmd_recipe(recipe: str, args) -> int:
    params, globals_cfg = _resolve_params(recipe, args)
    t0 = time.time()
    result = run_experiment(recipe, params)
    wall = time.time() - t0
    out_dir = _out_dir(recipe, args, globals_cfg)
    paths = _write_tables(result.tables, out_dir)
    _write_run_metadata(recipe, params, globals_cfg, out_dir, wall, params.get("seed", 0))
    if _figures_enabled(args, globals_cfg):
        paths += render_recipe_figure(recipe, result.tables, out_dir)
    for p in paths:
        print(p)
    return 0


def _cmd_list_recipes(_args) -> int:
    for name in ["rate", "solve"] + sorted(RECIPES):
        print(f"{name:16s} {RECIPE_DOC[name]}")
    return 0


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key")
    parser.add_argument("--out", help="output directory (default: $RSMAKIT_OUT/<recipe> or runs/<recipe>)")
    parser.add_argument("--seed", type=int, default=None, help="base RNG seed")
    parser.add_argument("--no-figures", action="store_true", help="skip figure rendering")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rsmakit",
        description="Rate-splitting multiple access simulation toolkit",
        epilog="Use 'rsmakit list-recipes' to see available runs; config keys per "
        "recipe are listed in each subcommand's help.",
    )
    parser.add_argument("--version", action="version", version=f"rsmakit {__version__}")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("list-recipes", help="list runnable recipes")
    p.set_defaults(func=_cmd_list_recipes)

    p = sub.add_parser("dof", help="closed-form sum/MMF DoF value")
    p.add_argument("--scheme", required=True, choices=["rsma", "sdma", "noma"])
    p.add_argument("--metric", default="sum", choices=["sum", "mmf"])
    p.add_argument("--csit", default="perfect", choices=["perfect", "imperfect"])
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--groups", type=int, default=1)
    p.add_argument("--exact", action="store_true", help="also print the exact rational value")
    p.set_defaults(func=_cmd_dof)

    for name, handler in (("rate", _cmd_rate), ("solve", _cmd_solve)):
        p = sub.add_parser(name, help=RECIPE_DOC[name], description=f"config keys: {', '.join(sorted(RECIPE_KEYS[name]))}")
        _add_common(p)
        p.set_defaults(func=handler)

    for name in sorted(RECIPES):
        p = sub.add_parser(
            name,
            help=RECIPE_DOC[name],
            description=f"config keys: {', '.join(sorted(RECIPE_KEYS[name]))}",
        )
        _add_common(p)
        p.set_defaults(func=lambda args, _name=name: _cmd_recipe(_name, args))

    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    known = {"list-recipes", "dof", "rate", "solve"} | set(RECIPES)
    head = next((a for a in argv if not a.startswith("-")), None)
    if head is not None and head not in known:
        hint = difflib.get_close_matches(head, sorted(known), n=1)
        print(
            f"unknown recipe {head!r}" + (f"; did you mean {hint[0]!r}?" if hint else ""),
            file=sys.stderr,
        )
        return 2
    parser = build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "command", None):
        parser.print_help()
        return 2
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (np.linalg.LinAlgError, FloatingPointError, ZeroDivisionError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
