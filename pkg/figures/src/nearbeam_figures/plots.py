"""Render simulator CSVs into figures.

Read-only consumer of the simulator's published output schemas: no
computation beyond unit conversion (polar to Cartesian position and
velocity). Headers are validated verbatim before anything is plotted.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

PLOT_KINDS = ("rcrb-panels", "trajectory-xy", "velocity-components")

# published simulator schemas, copied verbatim; a mismatch is a hard error
CRB_SWEEP_HEADER = (
    "r_m,rcrb_theta_rad,rcrb_r_m,rcrb_vr_mps,rcrb_vtheta_mps,"
    "condition_number,singular_flag"
).split(",")
TRACK_HEADER = (
    "cpi_index,"
    "true_theta_rad,true_r_m,true_vr_mps,true_vtheta_mps,"
    "est_theta_rad,est_r_m,est_vr_mps,est_vtheta_mps,"
    "pred_theta_rad,pred_r_m,pred_vr_mps,pred_vtheta_mps,"
    "post_theta_rad,post_r_m,post_vr_mps,post_vtheta_mps,"
    "rcrb_theta_rad,rcrb_r_m,rcrb_vr_mps,rcrb_vtheta_mps,"
    "gain_mean,rate_mean_bps_hz,genie_rate_mean,gain_loss_db,gated_out"
).split(",")


class SchemaError(ValueError):
    """Input file does not match the published schema."""


@dataclass(frozen=True)
class PlotSpec:
    kind: str
    inputs: tuple[Path, ...]
    out: Path
    log_scale: bool = True

    def __post_init__(self) -> None:
        if self.kind not in PLOT_KINDS:
            raise SchemaError(f"unknown plot kind {self.kind!r}")
        if not (1 <= len(self.inputs) <= 2):
            raise SchemaError("expected one or two input files")


def read_table(path: Path, expected: list[str]) -> list[dict[str, float]]:
    """Load a CSV whose header must equal the published one exactly."""
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise SchemaError(f"{path}: {exc.strerror or exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise SchemaError(f"{path}: empty file, expected header {','.join(expected)}")
        if header != expected:
            missing = [c for c in expected if c not in header]
            if missing:
                raise SchemaError(f"{path}: missing column(s): {', '.join(missing)}")
            extra = [c for c in header if c not in expected]
            if extra:
                raise SchemaError(f"{path}: unexpected column(s): {', '.join(extra)}")
            raise SchemaError(
                f"{path}: column order mismatch, expected {','.join(expected)}"
            )
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(expected):
                raise SchemaError(f"{path}:{lineno}: expected {len(expected)} fields")
            try:
                rows.append({k: float(v) for k, v in zip(expected, row)})
            except ValueError as exc:
                raise SchemaError(f"{path}:{lineno}: {exc}") from exc
        return rows


def config_hash_near(path: Path) -> str | None:
    """config_hash from a summary.json sitting next to the input, if any."""
    summary = path.parent / "summary.json"
    if not summary.exists():
        return None
    try:
        value = json.loads(summary.read_text()).get("config_hash")
    except (OSError, json.JSONDecodeError):
        return None
    return value if isinstance(value, str) else None


def _title(fig: Figure, kind: str, first_input: Path) -> None:
    digest = config_hash_near(first_input)
    text = kind if digest is None else f"{kind}  [config {digest[:12]}]"
    fig.suptitle(text)


def _xy(theta: float, r: float) -> tuple[float, float]:
    return r * math.cos(theta), r * math.sin(theta)


def _vxy(theta: float, vr: float, vt: float) -> tuple[float, float]:
    # velocity components along the x and y axes from the polar pair
    return (
        vr * math.cos(theta) - vt * math.sin(theta),
        vr * math.sin(theta) + vt * math.cos(theta),
    )


def _rcrb_panels(fig: Figure, spec: PlotSpec) -> None:
    axes = fig.subplots(1, 2)
    panels = (
        (axes[0], "position", (("rcrb_theta_rad", "angle (rad)"), ("rcrb_r_m", "distance (m)"))),
        (axes[1], "velocity", (("rcrb_vr_mps", "radial (m/s)"), ("rcrb_vtheta_mps", "transverse (m/s)"))),
    )
    for idx, path in enumerate(spec.inputs):
        rows = read_table(path, CRB_SWEEP_HEADER)
        if not rows:
            continue
        style = {"linestyle": "-", "marker": "o"} if idx == 0 else {"linestyle": "--", "marker": "s"}
        suffix = "" if len(spec.inputs) == 1 else f" ({path.stem})"
        r = [row["r_m"] for row in rows]
        for ax, _, series in panels:
            for col, label in series:
                ax.plot(r, [row[col] for row in rows], label=label + suffix, **style)
    for ax, name, _ in panels:
        # an all-empty panel cannot be log-scaled
        if spec.log_scale and ax.lines:
            ax.set_xscale("log")
            ax.set_yscale("log")
        ax.set_xlabel("distance (m)")
        ax.set_ylabel(f"root CRB, {name}")
        ax.grid(True, which="both", alpha=0.3)
        if ax.lines:
            ax.legend(fontsize=8)


def _trajectory_xy(fig: Figure, spec: PlotSpec) -> None:
    ax = fig.subplots()
    for idx, path in enumerate(spec.inputs):
        rows = read_table(path, TRACK_HEADER)
        suffix = "" if len(spec.inputs) == 1 else f" ({path.stem})"
        alpha = 1.0 if idx == 0 else 0.6
        truth = [_xy(row["true_theta_rad"], row["true_r_m"]) for row in rows]
        post = [_xy(row["post_theta_rad"], row["post_r_m"]) for row in rows]
        if truth:
            ax.plot(*zip(*truth), "-", label="truth" + suffix, alpha=alpha)
            ax.plot(*zip(*post), "--", label="filtered" + suffix, alpha=alpha)
            ax.plot(*truth[0], marker="o", color="black", markersize=4)
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    ax.set_aspect("equal", adjustable="datalim")
    ax.grid(True, alpha=0.3)
    if ax.lines:
        ax.legend(fontsize=8)


def _velocity_components(fig: Figure, spec: PlotSpec) -> None:
    ax_x, ax_y = fig.subplots(2, 1, sharex=True)
    for idx, path in enumerate(spec.inputs):
        rows = read_table(path, TRACK_HEADER)
        suffix = "" if len(spec.inputs) == 1 else f" ({path.stem})"
        alpha = 1.0 if idx == 0 else 0.6
        cpi = [row["cpi_index"] for row in rows]
        truth = [_vxy(row["true_theta_rad"], row["true_vr_mps"], row["true_vtheta_mps"]) for row in rows]
        post = [_vxy(row["post_theta_rad"], row["post_vr_mps"], row["post_vtheta_mps"]) for row in rows]
        for ax, take, label in ((ax_x, 0, "v_x"), (ax_y, 1, "v_y")):
            if cpi:
                ax.plot(cpi, [v[take] for v in truth], "-", label=f"{label} truth{suffix}", alpha=alpha)
                ax.plot(cpi, [v[take] for v in post], "--", label=f"{label} filtered{suffix}", alpha=alpha)
    for ax, name in ((ax_x, "v_x (m/s)"), (ax_y, "v_y (m/s)")):
        ax.set_ylabel(name)
        ax.grid(True, alpha=0.3)
        if ax.lines:
            ax.legend(fontsize=8)
    ax_y.set_xlabel("CPI index")


_RENDERERS = {
    "rcrb-panels": _rcrb_panels,
    "trajectory-xy": _trajectory_xy,
    "velocity-components": _velocity_components,
}


def build_figure(spec: PlotSpec) -> Figure:
    """Validate inputs and build the figure without touching the disk."""
    fig = Figure(figsize=(9, 4.5) if spec.kind == "rcrb-panels" else (6.5, 5.5))
    _RENDERERS[spec.kind](fig, spec)
    _title(fig, spec.kind, spec.inputs[0])
    return fig


def render(spec: PlotSpec) -> Path:
    """Render the spec to its output image and return the written path."""
    fig = build_figure(spec)
    spec.out.parent.mkdir(parents=True, exist_ok=True)
    FigureCanvasAgg(fig)
    fig.savefig(spec.out, dpi=150)
    return spec.out
