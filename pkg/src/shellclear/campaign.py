"""Fault-tolerance campaigns.

Scenarios combine a fault assignment (failed or stuck heaters, degraded
contact, extra lower-half losses) with a draw of component variability.
They are simulated in fixed-size batches; chunk boundaries depend only on
the scenario list, so results do not depend on how many worker processes
share the work.
"""
from __future__ import annotations

import itertools
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .control import ControllerConfig, natural_profile_from_baseline
from .deflection import BeamSpec
from .errors import InsufficientDataError, ParameterError, SequencingError
from .simulation import SimulationSettings, run_batch
from .thermal import HEAT_TRANSFER_COEFFICIENTS, N_HALF, N_ZONES, PlantParams

CONTACT_SPREAD = 0.5
GENERAL_SPREAD = 0.25
DEFAULT_AIRGAP_ZONES = (N_HALF + N_HALF // 2 - 1, N_HALF + N_HALF // 2)  # two mid-shell lower zones
DEFAULT_CHUNK = 64


def _zone_set(zones):
    out = frozenset(int(z) for z in zones)
    if any(z < 0 or z >= N_ZONES for z in out):
        raise ParameterError(f"zone indices must lie in [0, {N_ZONES}), got {sorted(out)}")
    return out


@dataclass(frozen=True)
class FaultSpec:
    failed_off: frozenset = frozenset()
    stuck_on: frozenset = frozenset()
    airgap_zones: frozenset = frozenset()
    airgap_factor: float = 20.0
    lower_loss_multiplier: float = 1.0

    def __post_init__(self):
        for name in ("failed_off", "stuck_on", "airgap_zones"):
            object.__setattr__(self, name, _zone_set(getattr(self, name)))
        if self.failed_off & self.stuck_on:
            raise ParameterError("a zone cannot be both failed off and stuck on")
        if not self.airgap_factor > 0.0:
            raise ParameterError("airgap_factor must be positive")
        if not self.lower_loss_multiplier > 0.0:
            raise ParameterError("lower_loss_multiplier must be positive")

    def apply(self, params):
        """Plant parameters with the degraded contact and extra losses applied."""
        changes = {}
        if self.airgap_zones:
            h = params.h_contact.copy()
            h[sorted(self.airgap_zones)] /= self.airgap_factor
            changes["h_contact"] = h
        if self.lower_loss_multiplier != 1.0:
            for name in ("a_shell_ambient", "a_blanket_ambient"):
                a = getattr(params, name).copy()
                a[N_HALF:] *= self.lower_loss_multiplier
                changes[name] = a
        return params.replace(**changes) if changes else params

    def masks(self):
        off = np.zeros(N_ZONES, bool)
        on = np.zeros(N_ZONES, bool)
        off[sorted(self.failed_off)] = True
        on[sorted(self.stuck_on)] = True
        return off, on

    def label(self):
        parts = []
        if self.failed_off:
            parts.append("off:" + "-".join(map(str, sorted(self.failed_off))))
        if self.stuck_on:
            parts.append("on:" + "-".join(map(str, sorted(self.stuck_on))))
        if self.airgap_zones:
            parts.append(f"gap{self.airgap_factor:g}:" + "-".join(map(str, sorted(self.airgap_zones))))
        if self.lower_loss_multiplier != 1.0:
            parts.append(f"loss{self.lower_loss_multiplier:g}x")
        return " ".join(parts) or "nominal"


@dataclass(frozen=True)
class VariabilitySample:
    """Multiplicative factors on the per-zone heat-transfer coefficients."""

    factors: dict = field(default_factory=dict)
    seed: tuple | None = None

    @classmethod
    def unit(cls):
        return cls({name: np.ones(N_ZONES) for name in HEAT_TRANSFER_COEFFICIENTS}, None)

    @classmethod
    def draw(cls, master_seed, index, draw=0):
        seed = (int(master_seed), int(index), int(draw))
        rng = np.random.default_rng(seed)
        factors = {}
        for name in HEAT_TRANSFER_COEFFICIENTS:
            spread = CONTACT_SPREAD if name == "h_contact" else GENERAL_SPREAD
            factors[name] = rng.uniform(1.0 - spread, 1.0 + spread, N_ZONES)
        return cls(factors, seed)

    def apply(self, params):
        if not self.factors:
            return params
        return params.replace(**{k: getattr(params, k) * v for k, v in self.factors.items()})


def enumerate_failures(k, zones=N_ZONES):
    """All ``k``-zone subsets in lexicographic order."""
    if not 0 <= k <= zones:
        raise ParameterError(f"k must lie in [0, {zones}], got {k}")
    return [frozenset(c) for c in itertools.combinations(range(zones), k)]


@dataclass(frozen=True)
class Baseline:
    """Uncontrolled cooldown summary; fixes the 100 % deflection level."""

    norm: float  # m, peak |midspan deflection|
    peak_time_h: float
    peak_to_peak: float  # m
    natural_profile: np.ndarray
    hold_time_h: float

    @property
    def peak_to_peak_pct(self):
        return 100.0 * self.peak_to_peak / self.norm


def compute_baseline(params, settings, hold_min, beam=None, horizon_h=None):
    horizon_h = settings.baseline_horizon_h if horizon_h is None else horizon_h
    res = run_batch([params], settings, None, beam, horizon_h=horizon_h, record=True)
    y = res.y_mid[0]
    i = int(np.argmax(np.abs(y)))
    profile, t_hold = natural_profile_from_baseline(res.times_h, res.t_zone[0], hold_min)
    base = Baseline(
        norm=float(abs(y[i])),
        peak_time_h=float(res.times_h[i]),
        peak_to_peak=float(y.max() - y.min()),
        natural_profile=profile,
        hold_time_h=t_hold,
    )
    return base, res


@dataclass
class CampaignContext:
    """Everything a worker needs to simulate scenarios."""

    params: PlantParams
    settings: SimulationSettings
    controller: ControllerConfig
    baseline: Baseline | None = None
    beam: BeamSpec | None = None
    master_seed: int = 0
    variability: bool = True
    draws: int = 1

    @classmethod
    def prepare(cls, params, settings, controller, beam=None, **kwargs):
        """Run the baseline and fold its normalization into the controller."""
        base, _ = compute_baseline(params, settings, controller.hold_min, beam)
        ctrl = controller.replace(natural_profile=base.natural_profile, deflection_norm=base.norm)
        return cls(params, settings, ctrl, base, beam, **kwargs)

    def require_baseline(self):
        if self.baseline is None:
            raise SequencingError("no baseline: run the uncontrolled cooldown first")
        return self.baseline


@dataclass(frozen=True)
class Scenario:
    index: int
    fault: FaultSpec
    variability: VariabilitySample
    group: str = ""


@dataclass(frozen=True)
class ScenarioResult:
    index: int
    group: str
    label: str
    seed: tuple | None
    p2p_pct: float
    zone_min: float
    zone_max: float


def make_scenarios(faults, ctx, group="", start=0):
    out = []
    idx = start
    for fault in faults:
        for d in range(ctx.draws):
            var = VariabilitySample.draw(ctx.master_seed, idx, d) if ctx.variability else VariabilitySample.unit()
            out.append(Scenario(idx, fault, var, group))
            idx += 1
    return out


def _simulate_chunk(args):
    scenarios, ctx = args
    base = ctx.require_baseline()
    params = [s.fault.apply(s.variability.apply(ctx.params)) for s in scenarios]
    masks = [s.fault.masks() for s in scenarios]
    off = np.stack([m[0] for m in masks])
    on = np.stack([m[1] for m in masks])
    res = run_batch(
        params, ctx.settings, ctx.controller, ctx.beam, off, on, scenario_ids=[s.index for s in scenarios]
    )
    p2p = 100.0 * res.peak_to_peak / base.norm
    return [
        ScenarioResult(s.index, s.group, s.fault.label(), s.variability.seed, float(p), float(lo), float(hi))
        for s, p, lo, hi in zip(scenarios, p2p, res.zone_min, res.zone_max)
    ]


def run_scenario(fault, var, ctx):
    """Simulate one scenario; returns its :class:`ScenarioResult`."""
    return _simulate_chunk(([Scenario(0, fault, var)], ctx))[0]


def run_scenarios(scenarios, ctx, workers=1, chunk_size=DEFAULT_CHUNK, progress=False):
    """Simulate scenarios in fixed chunks; results come back in input order."""
    ctx.require_baseline()
    chunks = [scenarios[i : i + chunk_size] for i in range(0, len(scenarios), chunk_size)]
    jobs = [(c, ctx) for c in chunks]
    out = []
    t0 = time.monotonic()
    if workers <= 1 or len(chunks) <= 1:
        results = map(_simulate_chunk, jobs)
        for n, r in enumerate(results, 1):
            out.extend(r)
            if progress:
                _report(n, len(chunks), t0)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for n, r in enumerate(pool.map(_simulate_chunk, jobs), 1):
                out.extend(r)
                if progress:
                    _report(n, len(chunks), t0)
    return out


def _report(done, total, t0):
    print(f"  chunk {done}/{total}  {time.monotonic() - t0:.0f} s", file=sys.stderr, flush=True)


@dataclass
class DensityEstimate:
    edges: np.ndarray
    histogram: np.ndarray  # density-normalized
    grid: np.ndarray
    density: np.ndarray
    bandwidth: float

    def integral(self):
        return float(np.trapezoid(self.density, self.grid))


def estimate_pdf(samples, bins=30, bandwidth=None, grid_points=801):
    """Histogram and Gaussian kernel density of ``samples``.

    The bandwidth defaults to Silverman's rule; a degenerate sample gets a
    small positive bandwidth.  The density is renormalized on its grid, which
    spans five bandwidths beyond the data, so it integrates to one.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 2:
        raise InsufficientDataError(f"need at least 2 samples, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise ParameterError("samples must be finite")
    hist, edges = np.histogram(x, bins=bins, density=True)
    if bandwidth is None:
        sigma = min(np.std(x, ddof=1), (np.percentile(x, 75) - np.percentile(x, 25)) / 1.349)
        if not sigma > 0.0:
            sigma = np.std(x, ddof=1)
        bandwidth = 0.9 * sigma * x.size ** (-0.2)
        if not bandwidth > 0.0:
            bandwidth = 1e-3 * max(1.0, abs(float(x[0])))
    grid = np.linspace(x.min() - 5 * bandwidth, x.max() + 5 * bandwidth, grid_points)
    dens = np.zeros_like(grid)
    for i in range(0, x.size, 2048):
        z = (grid[:, None] - x[None, i : i + 2048]) / bandwidth
        dens += np.exp(-0.5 * z * z).sum(axis=1)
    dens /= np.trapezoid(dens, grid)
    return DensityEstimate(edges, hist, grid, dens, float(bandwidth))


@dataclass
class GroupSummary:
    name: str
    count: int
    worst: float
    mean: float
    q95: float
    density: DensityEstimate | None


@dataclass
class CampaignResult:
    scenarios: list
    groups: dict
    baseline: Baseline
    master_seed: int

    def values(self, group=None):
        return np.array([r.p2p_pct for r in self.scenarios if group is None or r.group == group])


def summarize(results, baseline, master_seed):
    groups = {}
    for name in dict.fromkeys(r.group for r in results):
        v = np.array([r.p2p_pct for r in results if r.group == name])
        dens = estimate_pdf(v) if v.size >= 2 else None
        groups[name] = GroupSummary(name, int(v.size), float(v.max()), float(v.mean()), float(np.percentile(v, 95)), dens)
    return CampaignResult(results, groups, baseline, master_seed)


def run_campaign(ctx, k_values=(1, 2, 3, 4), workers=1, chunk_size=DEFAULT_CHUNK, progress=False):
    """All failed-heater combinations for each ``k``, one group per ``k``."""
    scenarios = []
    for k in k_values:
        faults = [FaultSpec(failed_off=c) for c in enumerate_failures(k)]
        scenarios += make_scenarios(faults, ctx, group=f"k={k}", start=len(scenarios))
    results = run_scenarios(scenarios, ctx, workers, chunk_size, progress)
    return summarize(results, ctx.require_baseline(), ctx.master_seed)


TABLE1_ROWS = (
    "One to four failed heaters",
    "Five failed heaters",
    "One heater stuck On",
    "Two heaters stuck On",
    "Out-of-spec air gaps (2)",
    "6x heat losses - lower shell",
    "7x heat losses - lower shell",
)


@dataclass
class Table1Report:
    rows: dict  # row name -> worst-case peak-to-peak %
    counts: dict
    nominal_pct: float
    baseline_pct: float

    def ordering_checks(self):
        r = self.rows
        return {
            "1-4 failed <= 5 failed": r[TABLE1_ROWS[0]] <= r[TABLE1_ROWS[1]],
            "5 failed < 7x losses": r[TABLE1_ROWS[1]] < r[TABLE1_ROWS[6]],
            "two stuck >= one stuck": r[TABLE1_ROWS[3]] >= r[TABLE1_ROWS[2]],
            "airgap <= 1-4 failed + 10": r[TABLE1_ROWS[4]] <= r[TABLE1_ROWS[0]] + 10.0,
            "6x losses < 50": r[TABLE1_ROWS[5]] < 50.0,
            "7x losses > 50": r[TABLE1_ROWS[6]] > 50.0,
        }

    def format(self):
        lines = [f"{'Case':<34}{'Peak-to-peak (%)':>18}{'Runs':>8}"]
        lines.append(f"{'Uncontrolled baseline':<34}{self.baseline_pct:>18.1f}{1:>8}")
        lines.append(f"{'Nominal controlled':<34}{self.nominal_pct:>18.1f}{1:>8}")
        for name in TABLE1_ROWS:
            lines.append(f"{name:<34}{self.rows[name]:>18.1f}{self.counts[name]:>8}")
        return "\n".join(lines)


def run_table1_suite(ctx, workers=1, failed_1_4=None, five_failed_limit=None, airgap_zones=DEFAULT_AIRGAP_ZONES,
                     chunk_size=DEFAULT_CHUNK, progress=False):
    """Worst case of each fault-table row.

    ``failed_1_4`` may pass a finished k=1..4 :class:`CampaignResult` to avoid
    recomputing it.  ``five_failed_limit`` caps the k=5 group to its first N
    combinations (all 15504 by default).
    """
    ctx.require_baseline()
    groups = {}
    if failed_1_4 is None:
        groups[TABLE1_ROWS[0]] = [FaultSpec(failed_off=c) for k in (1, 2, 3, 4) for c in enumerate_failures(k)]
    five = enumerate_failures(5)
    if five_failed_limit is not None:
        five = five[: int(five_failed_limit)]
    groups[TABLE1_ROWS[1]] = [FaultSpec(failed_off=c) for c in five]
    groups[TABLE1_ROWS[2]] = [FaultSpec(stuck_on=c) for c in enumerate_failures(1)]
    groups[TABLE1_ROWS[3]] = [FaultSpec(stuck_on=c) for c in enumerate_failures(2)]
    groups[TABLE1_ROWS[4]] = [FaultSpec(airgap_zones=frozenset(airgap_zones))]
    groups[TABLE1_ROWS[5]] = [FaultSpec(lower_loss_multiplier=6.0)]
    groups[TABLE1_ROWS[6]] = [FaultSpec(lower_loss_multiplier=7.0)]
    groups["nominal"] = [FaultSpec()]
    scenarios = []
    for name, faults in groups.items():
        scenarios += make_scenarios(faults, ctx, group=name, start=len(scenarios))
    results = run_scenarios(scenarios, ctx, workers, chunk_size, progress)
    rows, counts = {}, {}
    for name in groups:
        v = [r.p2p_pct for r in results if r.group == name]
        rows[name], counts[name] = max(v), len(v)
    if failed_1_4 is not None:
        v = failed_1_4.values()
        rows[TABLE1_ROWS[0]], counts[TABLE1_ROWS[0]] = float(v.max()), int(v.size)
    nominal = rows.pop("nominal")
    counts.pop("nominal")
    return Table1Report({n: rows[n] for n in TABLE1_ROWS}, {n: counts[n] for n in TABLE1_ROWS}, nominal,
                        ctx.baseline.peak_to_peak_pct)


def combination_count(k_values, zones=N_ZONES):
    return sum(math.comb(zones, k) for k in k_values)
