"""CSV emission and plot data.

Every CSV starts with one ``#`` line naming its schema and version plus any
metadata (``key=value``), followed by a fixed header row.  Temperatures are
written in degrees Celsius, deflections both in metres and as a percentage
of the recorded baseline peak.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .thermal import KELVIN, N_ZONES

TRAJECTORY_SCHEMA = ("trajectory", 1)
CAMPAIGN_SCHEMA = ("campaign", 1)
DENSITY_SCHEMA = ("density", 1)
HISTOGRAM_SCHEMA = ("histogram", 1)
TABLE1_SCHEMA = ("table1", 1)
PLOT_SCHEMA = ("plot", 1)


def trajectory_header(n_elements=5):
    cols = ["time_h"]
    cols += [f"t_zone_{i:02d}_c" for i in range(N_ZONES)]
    cols += [f"t_blanket_{i:02d}_c" for i in range(N_ZONES)]
    cols += ["t_rotor_c"]
    cols += [f"relay_{i:02d}" for i in range(N_ZONES)]
    cols += [f"ref_{i:02d}_c" for i in range(N_ZONES)]
    cols += [f"dT_element_{j}" for j in range(n_elements)]
    cols += ["y_mid_m", "y_mid_pct"]
    return cols


CAMPAIGN_HEADER = ["index", "group", "faults", "seed", "p2p_pct", "zone_min_c", "zone_max_c"]
DENSITY_HEADER = ["group", "x_pct", "density"]
HISTOGRAM_HEADER = ["group", "bin_low_pct", "bin_high_pct", "density"]
TABLE1_HEADER = ["case", "p2p_pct", "runs"]


def _schema_line(schema, **meta):
    parts = [f"# shellclear-{schema[0]} v{schema[1]}"]
    parts += [f"{k}={v}" for k, v in meta.items()]
    return " ".join(parts) + "\n"


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, float) or isinstance(v, np.floating):
        return "" if not np.isfinite(v) else repr(float(v))
    return str(v)


def _write(path, schema, header, rows, **meta):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(_schema_line(schema, **meta))
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def read_csv(path):
    """Return ``(schema_line_metadata, header, rows)`` of one of our CSV files."""
    with open(path, newline="", encoding="utf-8") as fh:
        first = fh.readline()
        if not first.startswith("# shellclear-"):
            raise ValueError(f"{path}: not a shellclear CSV")
        tokens = first[2:].split()
        meta = {"schema": tokens[0].removeprefix("shellclear-"), "version": int(tokens[1].lstrip("v"))}
        for tok in tokens[2:]:
            k, _, v = tok.partition("=")
            meta[k] = v
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    return meta, header, rows


def write_trajectory(path, result, baseline_norm, index=0):
    """Write one scenario of a recorded :class:`BatchResult`."""
    if result.t_zone is None:
        raise ValueError("trajectory output needs a recorded simulation")
    b = index
    n = result.times_h.size
    y = result.y_mid[b]
    ref = result.ref[b] if result.ref is not None else np.full((n, N_ZONES), np.nan)
    cols = [
        result.times_h[:, None],
        result.t_zone[b] - KELVIN,
        result.t_blanket[b] - KELVIN,
        (result.t_rotor[b] - KELVIN)[:, None],
        result.relay_on[b].astype(int),
        ref - KELVIN,
        result.element_dT[b],
        y[:, None],
        (100.0 * y / baseline_norm)[:, None],
    ]
    table = np.hstack([np.asarray(c, dtype=float) for c in cols])
    header = trajectory_header(result.element_dT.shape[-1])
    n_relay0 = 1 + 2 * N_ZONES + 1
    rows = []
    for r in table:
        row = [float(v) for v in r]
        for j in range(n_relay0, n_relay0 + N_ZONES):
            row[j] = int(row[j])
        rows.append(row)
    return _write(path, TRAJECTORY_SCHEMA, header, rows, baseline_norm_m=repr(float(baseline_norm)))


def load_trajectory(path):
    """Trajectory CSV as ``(meta, {column: array})``."""
    meta, header, rows = read_csv(path)
    data = np.array([[float(v) if v != "" else np.nan for v in r] for r in rows], dtype=float)
    data = data.reshape(-1, len(header))
    return meta, {h: data[:, i] for i, h in enumerate(header)}


def write_campaign(path, result):
    rows = [
        [r.index, r.group, r.label, "" if r.seed is None else "-".join(map(str, r.seed)), r.p2p_pct,
         r.zone_min - KELVIN, r.zone_max - KELVIN]
        for r in result.scenarios
    ]
    return _write(path, CAMPAIGN_SCHEMA, CAMPAIGN_HEADER, rows,
                  baseline_norm_m=repr(float(result.baseline.norm)), master_seed=result.master_seed)


def write_densities(path_density, path_hist, result):
    dens_rows, hist_rows = [], []
    for name, g in result.groups.items():
        if g.density is None:
            continue
        d = g.density
        dens_rows += [[name, x, v] for x, v in zip(d.grid, d.density)]
        hist_rows += [[name, lo, hi, v] for lo, hi, v in zip(d.edges[:-1], d.edges[1:], d.histogram)]
    meta = dict(baseline_norm_m=repr(float(result.baseline.norm)))
    _write(path_density, DENSITY_SCHEMA, DENSITY_HEADER, dens_rows, **meta)
    _write(path_hist, HISTOGRAM_SCHEMA, HISTOGRAM_HEADER, hist_rows, **meta)


def write_table1(path, report, baseline_norm):
    rows = [["Uncontrolled baseline", report.baseline_pct, 1], ["Nominal controlled", report.nominal_pct, 1]]
    rows += [[name, v, report.counts[name]] for name, v in report.rows.items()]
    return _write(path, TABLE1_SCHEMA, TABLE1_HEADER, rows, baseline_norm_m=repr(float(baseline_norm)))


def write_json(path, data):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def plot_data(trajectory_path):
    """Panel series for shell temperatures, differentials and deflection.

    Derived only from the trajectory CSV, so figures can be regenerated
    offline from archived runs.
    """
    meta, cols = load_trajectory(trajectory_path)
    t = cols["time_h"]
    upper = np.column_stack([cols[f"t_zone_{i:02d}_c"] for i in range(N_ZONES // 2)])
    lower = np.column_stack([cols[f"t_zone_{i:02d}_c"] for i in range(N_ZONES // 2, N_ZONES)])
    n_el = sum(1 for k in cols if k.startswith("dT_element_"))
    return {
        "time_h": t,
        "upper_mean_c": upper.mean(axis=1),
        "lower_mean_c": lower.mean(axis=1),
        "upper_max_c": upper.max(axis=1),
        "lower_min_c": lower.min(axis=1),
        **{f"dT_element_{j}": cols[f"dT_element_{j}"] for j in range(n_el)},
        "y_mid_pct": cols["y_mid_pct"],
        "baseline_norm_m": float(meta["baseline_norm_m"]),
    }


def write_plot_data(trajectory_path, out_path):
    data = plot_data(trajectory_path)
    keys = [k for k, v in data.items() if isinstance(v, np.ndarray)]
    rows = np.column_stack([data[k] for k in keys]).tolist()
    return _write(out_path, PLOT_SCHEMA, keys, rows, baseline_norm_m=repr(data["baseline_norm_m"]))


def _polyline(xs, ys, x0, y0, w, h, xr, yr, color):
    pts = []
    for x, y in zip(xs, ys):
        if not (np.isfinite(x) and np.isfinite(y)):
            continue
        px = x0 + (x - xr[0]) / (xr[1] - xr[0]) * w
        py = y0 + h - (y - yr[0]) / (yr[1] - yr[0]) * h
        pts.append(f"{px:.1f},{py:.1f}")
    return f'<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{" ".join(pts)}"/>'


def render_svg(trajectory_path, out_path, title=""):
    """Three stacked panels (temperatures, differentials, deflection) as SVG."""
    d = plot_data(trajectory_path)
    t = d["time_h"]
    xr = (float(t.min()), float(t.max()) if t.max() > t.min() else float(t.min()) + 1.0)
    panels = [
        ("Shell temperature (C)", [("upper_mean_c", "#c0392b"), ("lower_mean_c", "#2471a3")]),
        ("Element differential (K)", [(k, c) for k, c in zip(
            [k for k in d if k.startswith("dT_element_")],
            ["#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e"])]),
        ("Midspan deflection (% of baseline)", [("y_mid_pct", "#000000")]),
    ]
    W, H, pad = 720, 200, 50
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{len(panels) * (H + pad) + pad}">']
    if title:
        parts.append(f'<text x="{pad}" y="20" font-size="14">{title}</text>')
    for k, (label, series) in enumerate(panels):
        y0 = pad + k * (H + pad)
        vals = np.concatenate([d[s] for s, _ in series])
        vals = vals[np.isfinite(vals)]
        lo, hi = (float(vals.min()), float(vals.max())) if vals.size else (0.0, 1.0)
        if hi <= lo:
            lo, hi = lo - 1.0, hi + 1.0
        parts.append(f'<rect x="{pad}" y="{y0}" width="{W - 2 * pad}" height="{H}" fill="none" stroke="#888"/>')
        parts.append(f'<text x="{pad}" y="{y0 - 6}" font-size="12">{label}  [{lo:.3g}, {hi:.3g}]</text>')
        for name, color in series:
            parts.append(_polyline(t, d[name], pad, y0, W - 2 * pad, H, xr, (lo, hi), color))
    parts.append(f'<text x="{W // 2}" y="{len(panels) * (H + pad) + pad - 10}" font-size="12">time (h)</text>')
    parts.append("</svg>")
    Path(out_path).write_text("\n".join(parts) + "\n", encoding="utf-8")
    return Path(out_path)
