"""Two-loop heater controller.

Inner loop: one on/off relay per heating zone with hysteresis and a minimum
dwell between switches.  Outer loop: the deflection model estimates the
shell's bow from measured zone temperatures; the (low-pass filtered) error
against the desired profile, multiplied by a square gain matrix, trims the
zone references (down on one half, up on the other).

Relay and outer-loop helpers operate on the trailing axis, so a leading batch
dimension of independent scenarios is supported throughout.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .deflection import BeamSpec, DeflectionMap
from .errors import ParameterError, ShapeError
from .thermal import KELVIN, N_HALF, N_ZONES, PlantState

N_ELEMENTS = 5


@dataclass(frozen=True)
class ControllerConfig:
    """Controller tuning.

    The outer-loop gain acts on deflection error expressed as a fraction of
    ``deflection_norm`` (the uncontrolled baseline's peak midspan deflection)
    and ``gain_scale`` converts the product to kelvin per zone::

        offset_element = gain_scale * k_outer @ (e / deflection_norm)

    With the defaults a 1 % deflection error moves each affected zone
    reference by ``20 * 50 * 0.01 = 10`` K, i.e. a 20 K upper/lower split.
    References are always clipped to ``ref_bounds``.
    """

    k_outer: np.ndarray = field(default_factory=lambda: 50.0 * np.eye(N_ELEMENTS))
    gain_scale: float = 20.0  # K
    deflection_norm: float = 1.0e-3  # m
    hold_min: float = 520.0 + KELVIN
    natural_profile: np.ndarray = field(default_factory=lambda: np.zeros(N_ZONES))
    deadband: float = 2.0  # K, hysteresis half-width
    min_dwell: float = 60.0  # s
    ref_bounds: tuple = (25.0 + KELVIN, 600.0 + KELVIN)
    y_desired: np.ndarray = field(default_factory=lambda: np.zeros(N_ELEMENTS))
    outer_loop: bool = True
    filter_tau: float = 7200.0  # s, low-pass on the deflection estimate; 0 disables

    def __post_init__(self):
        k = np.array(self.k_outer, dtype=float)
        if k.ndim == 0:
            k = float(k) * np.eye(N_ELEMENTS)
        if k.shape != (N_ELEMENTS, N_ELEMENTS):
            raise ShapeError(f"k_outer must be {N_ELEMENTS}x{N_ELEMENTS}")
        if not np.all(np.isfinite(k)):
            raise ParameterError("k_outer must be finite")
        object.__setattr__(self, "k_outer", k)
        prof = np.array(self.natural_profile, dtype=float)
        if prof.shape != (N_ZONES,):
            raise ShapeError(f"natural_profile must have {N_ZONES} entries")
        object.__setattr__(self, "natural_profile", prof)
        yd = np.array(self.y_desired, dtype=float)
        if yd.shape != (N_ELEMENTS,):
            raise ShapeError(f"y_desired must have {N_ELEMENTS} entries")
        object.__setattr__(self, "y_desired", yd)
        lo, hi = (float(v) for v in self.ref_bounds)
        object.__setattr__(self, "ref_bounds", (lo, hi))
        if not self.deadband > 0.0:
            raise ParameterError("deadband must be positive")
        if not self.min_dwell >= 0.0:
            raise ParameterError("min_dwell must be non-negative")
        if not lo < hi:
            raise ParameterError("ref_bounds must be increasing")
        if self.hold_min < lo:
            raise ParameterError("hold_min must not be below ambient (ref_bounds[0])")
        if not self.deflection_norm > 0.0:
            raise ParameterError("deflection_norm must be positive")
        if not self.filter_tau >= 0.0:
            raise ParameterError("filter_tau must be non-negative")

    def replace(self, **changes):
        return replace(self, **changes)

    @property
    def hold_reference(self):
        return np.maximum(self.hold_min + self.natural_profile, self.ref_bounds[0])


@dataclass
class ControllerState:
    relay_on: np.ndarray
    dwell_elapsed: np.ndarray
    ref_current: np.ndarray
    last_deflection_error: np.ndarray
    fault_flags: np.ndarray
    deflection_estimate: np.ndarray  # filtered element deflections, NaN until first sample

    @classmethod
    def initial(cls, cfg, batch=()):
        shape = tuple(batch)
        ref = np.broadcast_to(np.clip(cfg.hold_reference, *cfg.ref_bounds), shape + (N_ZONES,)).copy()
        return cls(
            relay_on=np.zeros(shape + (N_ZONES,), dtype=bool),
            # a fresh controller may switch immediately
            dwell_elapsed=np.full(shape + (N_ZONES,), float(cfg.min_dwell)),
            ref_current=ref,
            last_deflection_error=np.zeros(shape + (N_ELEMENTS,)),
            fault_flags=np.zeros(shape + (N_ZONES,), dtype=bool),
            deflection_estimate=np.full(shape + (N_ELEMENTS,), np.nan),
        )


def relay_update(t_meas, ref, was_on, dwell, cfg):
    """Hysteresis relay with minimum dwell.

    On below ``ref - deadband``, off above ``ref + deadband``, otherwise the
    previous state.  A change is only allowed once the relay has dwelt at
    least ``min_dwell`` in its current state.
    """
    t_meas = np.asarray(t_meas, dtype=float)
    ref = np.asarray(ref, dtype=float)
    was_on = np.asarray(was_on, dtype=bool)
    want = np.where(t_meas < ref - cfg.deadband, True, np.where(t_meas > ref + cfg.deadband, False, was_on))
    allowed = np.asarray(dwell, dtype=float) >= cfg.min_dwell
    out = np.where(allowed, want, was_on)
    return bool(out) if out.ndim == 0 else out


def _deflection_map(beam):
    cached = _MAPS.get(beam)
    if cached is None:
        cached = _MAPS[beam] = DeflectionMap(beam)
    return cached


_MAPS: dict = {}


def deflection_error(t_upper, t_lower, cfg, beam):
    """``y_desired - y_estimated`` at each element midpoint, metres."""
    dmap = _deflection_map(beam)
    return cfg.y_desired - dmap.element_deflections(t_upper, t_lower)


def offsets_from_error(error, cfg):
    """Zone reference offsets (upper zones first) for an element error."""
    if not cfg.outer_loop:
        return np.zeros(np.shape(error)[:-1] + (N_ZONES,))
    correction = cfg.gain_scale * (np.asarray(error) / cfg.deflection_norm) @ cfg.k_outer.T
    per_zone = np.repeat(correction, N_HALF // N_ELEMENTS, axis=-1)
    # positive error = shell hogs (top hotter): cool the top, heat the bottom
    return np.concatenate((-per_zone, per_zone), axis=-1)


def outer_loop(t_upper, t_lower, cfg, beam):
    """Reference offsets from the deflection feedback loop."""
    t_upper = np.asarray(t_upper, dtype=float)
    t_lower = np.asarray(t_lower, dtype=float)
    if t_upper.shape[-1] != N_HALF or t_lower.shape != t_upper.shape:
        raise ShapeError("outer_loop expects matching (..., 10) temperature arrays")
    return offsets_from_error(deflection_error(t_upper, t_lower, cfg, beam), cfg)


def update(t_zone, state, cfg, beam, dt):
    """Batch controller update on measured zone temperatures ``(..., 20)``.

    Returns the commanded relay states and the new controller state.
    Non-finite measurements mark the zone faulted: its heater is commanded
    off and its temperature is excluded from the deflection estimate by
    substituting the zone's own reference.
    """
    t_zone = np.asarray(t_zone, dtype=float)
    faulted = ~np.isfinite(t_zone)
    hold = cfg.hold_reference
    t_used = np.where(faulted, state.ref_current, t_zone)
    y_now = _deflection_map(beam).element_deflections(t_used[..., :N_HALF], t_used[..., N_HALF:])
    y_est = filter_estimate(state.deflection_estimate, y_now, cfg.filter_tau, dt)
    error = cfg.y_desired - y_est
    offsets = offsets_from_error(error, cfg)
    ref = np.clip(hold + offsets, *cfg.ref_bounds)
    dwell = state.dwell_elapsed + dt
    on = relay_update(t_used, ref, state.relay_on, dwell, cfg)
    on = np.where(faulted, False, on)
    switched = on != state.relay_on
    dwell = np.where(switched, 0.0, dwell)
    new = ControllerState(
        relay_on=on,
        dwell_elapsed=dwell,
        ref_current=ref,
        last_deflection_error=error,
        fault_flags=faulted,
        deflection_estimate=y_est,
    )
    return on, new


def filter_estimate(previous, sample, tau, dt):
    """First-order low-pass (backward Euler) seeded with the first sample.

    Keeps relay ripple out of the reference trims; the outer loop works on
    the shell's hours-long bowing, not the minutes-long relay cycle.
    """
    if tau <= 0.0:
        return sample
    previous = np.asarray(previous, dtype=float)
    blend = dt / (tau + dt)
    return np.where(np.isnan(previous), sample, previous + blend * (sample - previous))


def controller_step(meas, state, cfg, dt, beam=None):
    """One sample of the controller for a single plant state.

    ``dt`` is the controller sample period.  Returns ``(command, state)``.
    """
    if not dt > 0.0:
        raise ParameterError("controller period must be positive")
    beam = beam or BeamSpec()
    t_zone = meas.t_zone if isinstance(meas, PlantState) else np.asarray(meas, dtype=float)
    return update(t_zone, state, cfg, beam, dt)


def natural_profile_from_baseline(times, t_zone_history, hold_min):
    """Axial reference shape taken from an uncontrolled cooldown.

    Finds the first sample at which the mid-shell temperature (mean of the
    two central zones of both halves) falls to ``hold_min`` and returns each
    axial position's temperature relative to mid-shell, averaged over the two
    halves so that the shape itself carries no top/bottom differential.
    """
    t_zone_history = np.asarray(t_zone_history, dtype=float)
    upper = t_zone_history[:, :N_HALF]
    lower = t_zone_history[:, N_HALF:]
    mean_axial = 0.5 * (upper + lower)
    mid = mean_axial[:, N_HALF // 2 - 1 : N_HALF // 2 + 1].mean(axis=1)
    below = np.flatnonzero(mid <= hold_min)
    idx = int(below[0]) if below.size else len(mid) - 1
    shape = mean_axial[idx] - mid[idx]
    return np.concatenate((shape, shape)), float(np.asarray(times)[idx])
