"""Thermal bowing of the shell as a chain of simply supported beam elements.

Each element carries a uniform top-to-bottom temperature differential, which
imposes a constant curvature ``(gamma / t_b) * dT``.  Within an element the
slope is linear and the deflection quadratic in the local coordinate.  The
chain is pinned at both ends; slope and deflection are continuous at joints.

Sign conventions
----------------
``dT = T_upper - T_lower`` (positive when the top is hotter).  Deflection
``y`` is measured positive *downward*, so a top-hotter shell (hogging,
reverse-U) has a negative midspan deflection and a bottom-hotter shell
(sagging, U) a positive one.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, ShapeError

N_ZONES_PER_HALF = 10


@dataclass(frozen=True)
class BeamSpec:
    """Geometry and material of the beam chain."""

    lengths: tuple = (2.0, 2.0, 2.0, 2.0, 2.0)  # m
    gamma: float = 1.25e-5  # 1/K
    t_b: float = 2.0  # m, beam depth

    def __post_init__(self):
        lengths = tuple(float(v) for v in self.lengths)
        object.__setattr__(self, "lengths", lengths)
        if not lengths:
            raise ParameterError("beam needs at least one element")
        if any(not np.isfinite(v) or v <= 0.0 for v in lengths):
            raise ParameterError(f"element lengths must be positive, got {lengths}")
        if not self.gamma > 0.0:
            raise ParameterError("gamma must be positive")
        if not self.t_b > 0.0:
            raise ParameterError("t_b must be positive")

    @classmethod
    def uniform(cls, total_length, n_elements=5, **kwargs):
        return cls(lengths=(total_length / n_elements,) * n_elements, **kwargs)

    @property
    def n_elements(self):
        return len(self.lengths)

    @property
    def total_length(self):
        return float(sum(self.lengths))

    @property
    def joints(self):
        """Axial positions of the element boundaries, ``n + 1`` values."""
        return np.concatenate(([0.0], np.cumsum(self.lengths)))

    @property
    def curvature_per_kelvin(self):
        return self.gamma / self.t_b


@dataclass
class DeflectionProfile:
    """Solved deflection of the beam chain for one differential vector."""

    y: np.ndarray  # deflection at joints, m
    theta: np.ndarray  # slope at joints, rad
    dT: np.ndarray  # per-element differential, K
    spec: BeamSpec = field(repr=False)

    def deflection_at(self, x):
        """Deflection at axial position(s) ``x`` measured from the left support."""
        x = np.asarray(x, dtype=float)
        joints = self.spec.joints
        if np.any(x < -1e-12) or np.any(x > joints[-1] * (1 + 1e-12)):
            raise ParameterError("position outside the beam")
        j = np.clip(np.searchsorted(joints, x, side="right") - 1, 0, self.spec.n_elements - 1)
        local = x - joints[j]
        k = self.spec.curvature_per_kelvin * self.dT[j]
        return self.y[j] + self.theta[j] * local + 0.5 * k * local**2

    @property
    def element_midpoints(self):
        joints = self.spec.joints
        return 0.5 * (joints[:-1] + joints[1:])

    @property
    def y_elements(self):
        """Deflection at each element midpoint."""
        return self.deflection_at(self.element_midpoints)

    @property
    def y_mid(self):
        """Midspan deflection."""
        return float(self.deflection_at(0.5 * self.spec.total_length))


def element_slope_deflection(theta0, y0, dT, x, spec, length=None):
    """Slope and deflection a distance ``x`` into an element.

    ``theta0`` and ``y0`` are the values at the element's left joint.  With
    ``length`` given, ``x`` must lie inside ``[0, length]``.
    """
    if length is not None and not (0.0 <= x <= length):
        raise ParameterError(f"x={x} outside element of length {length}")
    k = spec.curvature_per_kelvin * dT
    theta = theta0 + k * x
    y = y0 + theta0 * x + 0.5 * k * x * x
    return theta, y


def _propagate(theta0, dT, spec):
    theta = np.empty(spec.n_elements + 1)
    y = np.empty(spec.n_elements + 1)
    theta[0], y[0] = theta0, 0.0
    for j, (length, d) in enumerate(zip(spec.lengths, dT)):
        theta[j + 1], y[j + 1] = element_slope_deflection(theta[j], y[j], d, length, spec)
    return theta, y


def solve_beam(dT, spec):
    """Deflection of the pinned chain for per-element differentials ``dT``.

    Continuity is imposed by marching from the left support; the single free
    parameter, the left-end slope, follows from ``y(L) = 0``.  ``y(L)`` is
    affine in that slope with coefficient ``L``, so one trial march suffices.
    """
    dT = np.asarray(dT, dtype=float)
    if dT.shape != (spec.n_elements,):
        raise ShapeError(f"expected {spec.n_elements} element differentials, got shape {dT.shape}")
    _, y_trial = _propagate(0.0, dT, spec)
    theta0 = -y_trial[-1] / spec.total_length
    theta, y = _propagate(theta0, dT, spec)
    y[0] = 0.0
    y[-1] = 0.0
    return DeflectionProfile(y=y, theta=theta, dT=dT.copy(), spec=spec)


def two_element_end_slopes(dT1, dT2, l1, l2, gamma, t_b):
    """End slopes of a two-element chain in closed form.

    Returns ``(theta_A, theta_C)`` where ``theta_C`` is measured with the
    right element's coordinate running from the right support towards the
    joint (so the forward-frame slope at the right end is ``-theta_C``).
    """
    c = gamma / t_b
    # deflection match at the joint: theta_A l1 - theta_C l2 = (c/2)(dT2 l2^2 - dT1 l1^2)
    # slope match at the joint:      theta_A + theta_C = -c (dT1 l1 + dT2 l2)
    rhs_deflection = 0.5 * c * (dT2 * l2**2 - dT1 * l1**2)
    rhs_slope = -c * (dT1 * l1 + dT2 * l2)
    theta_c = (l1 * rhs_slope - rhs_deflection) / (l1 + l2)
    theta_a = rhs_slope - theta_c
    return theta_a, theta_c


def zone_to_element_dT(t_upper, t_lower, n_elements=5):
    """Per-element differential from per-zone upper and lower temperatures.

    Each element averages ``t_upper - t_lower`` over its consecutive zones.
    Works on trailing axis so batches of shape ``(..., 10)`` are accepted.
    """
    t_upper = np.asarray(t_upper, dtype=float)
    t_lower = np.asarray(t_lower, dtype=float)
    if t_upper.shape[-1] != N_ZONES_PER_HALF or t_lower.shape != t_upper.shape:
        raise ShapeError(
            f"expected matching (..., {N_ZONES_PER_HALF}) arrays, got {t_upper.shape} and {t_lower.shape}"
        )
    if N_ZONES_PER_HALF % n_elements:
        raise ShapeError(f"{N_ZONES_PER_HALF} zones do not split evenly into {n_elements} elements")
    diff = t_upper - t_lower
    return diff.reshape(diff.shape[:-1] + (n_elements, -1)).mean(axis=-1)


def peak_to_peak(series):
    """max - min of a deflection time series."""
    series = np.asarray(series, dtype=float)
    return float(series.max() - series.min())


class DeflectionMap:
    """Precomputed linear map from zone temperatures to deflections.

    ``solve_beam`` is linear in ``dT``; this class evaluates it on the unit
    vectors once so batched simulations can reuse the result as matrices.
    """

    def __init__(self, spec):
        self.spec = spec
        n = spec.n_elements
        self.element_matrix = np.empty((n, n))  # element dT -> element-midpoint y
        self.midspan_row = np.empty(n)
        for j in range(n):
            unit = np.zeros(n)
            unit[j] = 1.0
            prof = solve_beam(unit, spec)
            self.element_matrix[:, j] = prof.y_elements
            self.midspan_row[j] = prof.y_mid
        zones_per = N_ZONES_PER_HALF // n
        self.zone_to_element = np.kron(np.eye(n), np.full((1, zones_per), 1.0 / zones_per))

    def element_dT(self, t_upper, t_lower):
        return (np.asarray(t_upper) - np.asarray(t_lower)) @ self.zone_to_element.T

    def element_deflections(self, t_upper, t_lower):
        return self.element_dT(t_upper, t_lower) @ self.element_matrix.T

    def midspan(self, t_upper, t_lower):
        return self.element_dT(t_upper, t_lower) @ self.midspan_row
