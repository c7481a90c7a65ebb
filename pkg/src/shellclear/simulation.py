"""Closed-loop plant/controller co-simulation.

Scenarios are advanced in lock-step as a batch: each carries its own
propagator matrices, but controller logic and plant updates are evaluated
as array operations over the batch.  A batch of one is the ordinary
single-run case.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import control
from .deflection import BeamSpec, DeflectionMap
from .errors import NumericalInstabilityError, ParameterError
from .thermal import (
    N_HALF,
    N_ZONES,
    ZONE_NODE,
    PlantParams,
    ProfileSpec,
    Propagator,
    initial_hot_shutdown_state,
    state_labels,
)

HOUR = 3600.0


@dataclass(frozen=True)
class SimulationSettings:
    dt: float = 10.0  # s, plant step
    controller_period: float = 60.0  # s
    horizon_h: float = 150.0
    baseline_horizon_h: float = 300.0
    profile: ProfileSpec = field(default_factory=ProfileSpec)

    def __post_init__(self):
        if not self.dt > 0.0:
            raise ParameterError("simulation.dt must be positive")
        if not self.controller_period > 0.0:
            raise ParameterError("simulation.controller_period must be positive")
        if not self.horizon_h > 0.0 or not self.baseline_horizon_h > 0.0:
            raise ParameterError("simulation horizons must be positive")

    @property
    def substeps(self):
        """Plant steps per controller sample (at least one)."""
        return max(1, int(round(self.controller_period / self.dt)))

    @property
    def period(self):
        """Effective controller period, an integer number of plant steps."""
        return self.substeps * self.dt


@dataclass
class BatchResult:
    times_h: np.ndarray  # (N,)
    y_mid: np.ndarray  # (B, N), m
    zone_min: np.ndarray  # (B,)
    zone_max: np.ndarray  # (B,)
    t_zone: np.ndarray | None = None  # (B, N, 20)
    t_blanket: np.ndarray | None = None  # (B, N, 20)
    t_rotor: np.ndarray | None = None  # (B, N)
    relay_on: np.ndarray | None = None  # (B, N, 20)
    ref: np.ndarray | None = None  # (B, N, 20)
    element_dT: np.ndarray | None = None  # (B, N, 5)
    hold_start_h: np.ndarray | None = None  # (B,)

    @property
    def peak_to_peak(self):
        return self.y_mid.max(axis=1) - self.y_mid.min(axis=1)

    @property
    def peak_abs(self):
        return np.abs(self.y_mid).max(axis=1)


def _stack_propagators(params_seq, settings):
    props = [Propagator(p, settings.dt, settings.substeps) for p in params_seq]
    phi = np.stack([p.phi for p in props])
    psi = np.stack([p.psi for p in props])
    gam = np.stack([p.gamma for p in props])
    return phi, psi, gam


def run_batch(
    params_seq,
    settings,
    cfg=None,
    beam=None,
    forced_off=None,
    forced_on=None,
    horizon_h=None,
    record=False,
    initial=None,
    scenario_ids=None,
):
    """Simulate a batch of scenarios from hot shutdown.

    ``cfg=None`` runs uncontrolled (all heaters off unless forced on).
    ``forced_off``/``forced_on`` are ``(B, 20)`` boolean masks applied to the
    command after the controller (failed heaters and stuck relays).
    """
    params_seq = list(params_seq)
    B = len(params_seq)
    beam = beam or BeamSpec.uniform(params_seq[0].shell_length)
    dmap = DeflectionMap(beam)
    horizon_h = settings.horizon_h if horizon_h is None else horizon_h
    period = settings.period
    n_periods = int(round(horizon_h * HOUR / period))
    forced_off = np.zeros((B, N_ZONES), bool) if forced_off is None else np.asarray(forced_off, bool)
    forced_on = np.zeros((B, N_ZONES), bool) if forced_on is None else np.asarray(forced_on, bool)

    phi, psi, gam = _stack_propagators(params_seq, settings)
    if initial is None:
        x = np.stack([initial_hot_shutdown_state(p, settings.profile).to_vector() for p in params_seq])
    else:
        x = np.array(initial, dtype=float).reshape(B, -1)

    ctrl_state = control.ControllerState.initial(cfg, (B,)) if cfg is not None else None
    hold_ref = cfg.hold_reference if cfg is not None else None
    hold_start = np.full(B, np.nan)

    n_rec = n_periods + 1
    y_mid = np.empty((B, n_rec))
    tz = x[:, ZONE_NODE]
    y_mid[:, 0] = dmap.midspan(tz[:, :N_HALF], tz[:, N_HALF:])
    zmin = tz.min(axis=1)
    zmax = tz.max(axis=1)
    if record:
        rec_tz = np.empty((B, n_rec, N_ZONES))
        rec_tb = np.empty((B, n_rec, N_ZONES))
        rec_tr = np.empty((B, n_rec))
        rec_on = np.zeros((B, n_rec, N_ZONES), bool)
        rec_ref = np.full((B, n_rec, N_ZONES), np.nan)
        rec_tz[:, 0] = tz
        rec_tb[:, 0] = x[:, 24:44]
        rec_tr[:, 0] = x[:, -1]
        if cfg is not None:
            rec_ref[:, 0] = ctrl_state.ref_current

    u = np.zeros((B, N_ZONES), bool)
    for n in range(n_periods):
        if cfg is not None:
            u, ctrl_state = control.update(tz, ctrl_state, cfg, beam, period)
            reached = np.isnan(hold_start) & np.any(tz <= hold_ref + cfg.deadband, axis=1)
            hold_start[reached] = n * period / HOUR
        cmd = (u & ~forced_off) | forced_on
        x = np.einsum("bij,bj->bi", phi, x) + psi + np.einsum("bij,bj->bi", gam, cmd.astype(float))
        tz = x[:, ZONE_NODE]
        if not np.all(np.isfinite(x)):
            bad = np.argwhere(~np.isfinite(x))[0]
            sid = scenario_ids[bad[0]] if scenario_ids is not None else int(bad[0])
            name = state_labels()[bad[1]]
            raise NumericalInstabilityError(
                f"non-finite {name} in scenario {sid} at t={(n + 1) * period / HOUR:.2f} h",
                component=name,
                scenario=sid,
            )
        y_mid[:, n + 1] = dmap.midspan(tz[:, :N_HALF], tz[:, N_HALF:])
        np.minimum(zmin, tz.min(axis=1), out=zmin)
        np.maximum(zmax, tz.max(axis=1), out=zmax)
        if record:
            rec_tz[:, n + 1] = tz
            rec_tb[:, n + 1] = x[:, 24:44]
            rec_tr[:, n + 1] = x[:, -1]
            rec_on[:, n + 1] = cmd
            if cfg is not None:
                rec_ref[:, n + 1] = ctrl_state.ref_current

    times_h = np.arange(n_rec) * period / HOUR
    out = BatchResult(times_h=times_h, y_mid=y_mid, zone_min=zmin, zone_max=zmax, hold_start_h=hold_start)
    if record:
        out.t_zone = rec_tz
        out.t_blanket = rec_tb
        out.t_rotor = rec_tr
        out.relay_on = rec_on
        out.ref = rec_ref
        out.element_dT = dmap.element_dT(rec_tz[..., :N_HALF], rec_tz[..., N_HALF:])
    return out


def run_single(params, settings, cfg=None, beam=None, failed_off=(), stuck_on=(), **kwargs):
    """Convenience wrapper for one scenario; returns a batch-of-one result."""
    off = np.zeros((1, N_ZONES), bool)
    on = np.zeros((1, N_ZONES), bool)
    off[0, list(failed_off)] = True
    on[0, list(stuck_on)] = True
    return run_batch([params], settings, cfg, beam, off, on, **kwargs)


def hold_onset_index(relay_on):
    """First record index by which every relay has energized at least once.

    ``relay_on`` is one scenario's ``(N, 20)`` relay history.  Returns ``None``
    when some heater never switched on (e.g. a failed-off zone).
    """
    seen = np.maximum.accumulate(np.asarray(relay_on, bool), axis=0).all(axis=1)
    return int(np.argmax(seen)) if seen.any() else None
