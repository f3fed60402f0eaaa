"""Render a summary figure for each recipe next to its CSV output.

Figures are a convenience view of the delimited data; the CSVs remain the
authoritative artifacts.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

__all__ = ["render_recipe_figure"]

_SCHEME_COLORS = {
    "rsma": "tab:red",
    "sdma": "tab:blue",
    "noma": "tab:green",
    "oma": "tab:orange",
    "zf-sdma": "tab:blue",
}


def _schemes(rows):
    seen = []
    for r in rows:
        s = r.get("scheme")
        if s and s not in seen:
            seen.append(s)
    return seen


def _line_by_scheme(ax, rows, x_key, y_key):
    for scheme in _schemes(rows):
        pts = [(r[x_key], r[y_key]) for r in rows if r.get("scheme") == scheme and r[y_key] != ""]
        pts.sort()
        ax.plot(
            [p[0] for p in pts],
            [p[1] for p in pts],
            marker="o",
            label=scheme,
            color=_SCHEME_COLORS.get(scheme),
        )
    ax.set_xlabel(x_key)
    ax.set_ylabel(y_key)
    ax.grid(True, alpha=0.3)
    ax.legend()


def render_recipe_figure(recipe: str, tables: dict, out_dir: Path) -> list[Path]:
    """Write <recipe>.png under out_dir from the recipe's row tables."""
    out_dir = Path(out_dir)
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    main = tables.get(recipe, (None, []))[1]
    try:
        if recipe == "rate-region":
            for scheme in _schemes(main):
                pts = [(r["R1"], r["R2"]) for r in main if r["scheme"] == scheme]
                pts.sort()
                ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=scheme,
                        color=_SCHEME_COLORS.get(scheme))
            ax.set_xlabel("R1 (bit/s/Hz)")
            ax.set_ylabel("R2 (bit/s/Hz)")
            ax.legend()
            ax.grid(True, alpha=0.3)
        elif recipe == "esr-vs-alpha":
            _line_by_scheme(ax, main, "alpha", "esr")
        elif recipe == "mmf-vs-snr":
            _line_by_scheme(ax, main, "snr_db", "mmf_rate")
        elif recipe == "dof-slope":
            _line_by_scheme(ax, main, "snr_db", "avg_sum_rate")
            summary = tables.get("dof-slope-summary", (None, []))[1]
            txt = ", ".join(f"{r['scheme']}: slope {r['slope']:.2f}" for r in summary)
            ax.set_title(txt, fontsize=9)
        elif recipe == "overloaded-qos":
            _line_by_scheme(ax, main, "snr_db", "avg_wsr")
        elif recipe == "uplink-region":
            corners = [(r["R1"], r["R2"]) for r in main if r["point_type"] == "corner"]
            face = sorted((r["R1"], r["R2"]) for r in main if r["point_type"] == "face")
            ax.plot([p[0] for p in face], [p[1] for p in face], "r.-", label="rate-split points")
            ax.plot([p[0] for p in corners], [p[1] for p in corners], "ks", label="corners")
            ax.set_xlabel("R1 (bit/s/Hz)")
            ax.set_ylabel("R2 (bit/s/Hz)")
            ax.legend()
            ax.grid(True, alpha=0.3)
        elif recipe == "oper-region":
            labels = sorted({r["label"] for r in main})
            colors = {lab: _SCHEME_COLORS.get(lab, "gray") for lab in labels}
            for lab in labels:
                xs = [r["rho"] for r in main if r["label"] == lab]
                ys = [r["gamma_db"] for r in main if r["label"] == lab]
                ax.scatter(xs, ys, c=colors[lab], label=lab, marker="s", s=120)
            ax.set_xlabel("rho (channel separation)")
            ax.set_ylabel("gamma (dB)")
            ax.legend()
        else:
            _line_by_scheme(ax, main, "snr_db", "rate")
        fig.tight_layout()
        path = out_dir / f"{recipe}.png"
        fig.savefig(path, dpi=120)
        return [path]
    finally:
        plt.close(fig)
