"""Coupled thermal model of shell halves, heating blankets and rotor.

Each shell half is a 1-D axial finite-difference chain: ten heated zone nodes
with one unheated half-cell node at each end (the service-access ends carry
no blankets, so their external heat input is identically zero).  Every zone
node exchanges heat with its blanket (contact conductance), with ambient
(effective loss through insulation) and with the lumped rotor.  Blankets lose
heat to ambient and never exchange heat with each other.  The two halves are
not directly connected; they only interact through the rotor.

All temperatures are kelvin, times seconds, powers watts.

State vector layout used by the linear-system helpers::

    [0:12]   upper chain  (end, zone 0..9, end)
    [12:24]  lower chain  (end, zone 0..9, end)
    [24:44]  blankets     (upper zone 0..9, lower zone 0..9)
    [44]     rotor
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields, replace

import numpy as np

from .errors import NumericalInstabilityError, ParameterError, ShapeError

N_HALF = 10
N_ZONES = 2 * N_HALF
CHAIN = N_HALF + 2
N_STATE = 2 * CHAIN + N_ZONES + 1
BLANKET0 = 2 * CHAIN
ROTOR = N_STATE - 1
KELVIN = 273.15

# shell-node state index of each of the 20 zones
ZONE_NODE = np.concatenate((np.arange(1, N_HALF + 1), CHAIN + np.arange(1, N_HALF + 1)))
END_NODES = np.array([0, CHAIN - 1, CHAIN, 2 * CHAIN - 1])

_PER_ZONE = (
    "node_volume",
    "blanket_heat_capacity",
    "heater_power",
    "h_contact",
    "a_contact",
    "h_blanket_ambient",
    "a_blanket_ambient",
    "h_shell_ambient",
    "a_shell_ambient",
    "h_rotor",
    "a_rotor",
)

# coefficients perturbed by component variability
HEAT_TRANSFER_COEFFICIENTS = ("h_contact", "h_blanket_ambient", "h_shell_ambient", "h_rotor")


def _halves(upper, lower):
    return np.concatenate((np.full(N_HALF, float(upper)), np.full(N_HALF, float(lower))))


@dataclass(frozen=True)
class PlantParams:
    """Geometry, material and heat-transfer coefficients of the plant.

    Per-zone arrays have 20 entries, upper-half zones first.  The default
    values are a representative large HP-IP shell, not a calibrated unit.
    """

    alpha: float = 6.0e-6  # m^2/s
    k_cond: float = 30.0  # W/(m K)
    shell_length: float = 10.0  # m, heated span
    node_volume: np.ndarray = field(default_factory=lambda: _halves(0.0758, 0.1455))  # m^3
    blanket_heat_capacity: np.ndarray = field(default_factory=lambda: np.full(N_ZONES, 5.0e3))
    # sized per half against the zone's losses at the hold temperature
    heater_power: np.ndarray = field(default_factory=lambda: _halves(7.7e3, 22.5e3))
    h_contact: np.ndarray = field(default_factory=lambda: np.full(N_ZONES, 500.0))
    a_contact: np.ndarray = field(default_factory=lambda: np.full(N_ZONES, 2.0))
    h_blanket_ambient: np.ndarray = field(default_factory=lambda: np.full(N_ZONES, 1.18))
    a_blanket_ambient: np.ndarray = field(default_factory=lambda: np.full(N_ZONES, 2.0))
    h_shell_ambient: np.ndarray = field(default_factory=lambda: _halves(1.0, 1.21))
    a_shell_ambient: np.ndarray = field(default_factory=lambda: _halves(2.81, 4.22))
    h_rotor: np.ndarray = field(default_factory=lambda: _halves(7.94, 3.78))
    a_rotor: np.ndarray = field(default_factory=lambda: np.full(N_ZONES, 1.0))
    rotor_heat_capacity: float = 2.54e7  # J/K
    t_ambient: float = 25.0 + KELVIN

    def __post_init__(self):
        for name in _PER_ZONE:
            arr = np.array(getattr(self, name), dtype=float)
            if arr.ndim == 0:
                arr = np.full(N_ZONES, float(arr))
            if arr.shape != (N_ZONES,):
                raise ShapeError(f"{name} must have {N_ZONES} entries, got shape {arr.shape}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        for name in ("alpha", "k_cond", "shell_length", "rotor_heat_capacity", "t_ambient"):
            value = float(getattr(self, name))
            object.__setattr__(self, name, value)
            if not (np.isfinite(value) and value > 0.0):
                raise ParameterError(f"{name} must be positive and finite, got {value}")
        for name in _PER_ZONE:
            arr = getattr(self, name)
            if name == "heater_power":
                ok = np.all(arr >= 0.0)
            else:
                ok = np.all(arr > 0.0)
            if not (ok and np.all(np.isfinite(arr))):
                raise ParameterError(f"{name} entries must be positive and finite")
        if np.any(self.a_shell_ambient[N_HALF:] < self.a_shell_ambient[:N_HALF]):
            raise ParameterError("lower-half a_shell_ambient must be >= the upper-half value of the same zone")

    def replace(self, **changes):
        return replace(self, **changes)

    @property
    def h_node(self):
        return self.shell_length / N_HALF

    @property
    def node_heat_capacity(self):
        """Per-zone-node capacity, ``k V / alpha`` (= rho c V)."""
        return self.k_cond * self.node_volume / self.alpha

    # lumped conductances, W/K
    @property
    def g_contact(self):
        return self.h_contact * self.a_contact

    @property
    def g_blanket_ambient(self):
        return self.h_blanket_ambient * self.a_blanket_ambient

    @property
    def g_shell_ambient(self):
        return self.h_shell_ambient * self.a_shell_ambient

    @property
    def g_rotor(self):
        return self.h_rotor * self.a_rotor

    def as_dict(self):
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            out[f.name] = value.tolist() if isinstance(value, np.ndarray) else value
        return out


@dataclass
class PlantState:
    """Full thermal state.

    ``t_shell_upper``/``t_shell_lower`` hold the ten zone nodes of each half;
    ``t_end`` holds the four unheated end half-cells (upper left, upper
    right, lower left, lower right).
    """

    t_shell_upper: np.ndarray
    t_shell_lower: np.ndarray
    t_blanket: np.ndarray
    t_rotor: float
    t_end: np.ndarray
    sim_time: float = 0.0

    def to_vector(self):
        x = np.empty(N_STATE)
        x[1 : N_HALF + 1] = self.t_shell_upper
        x[CHAIN + 1 : CHAIN + N_HALF + 1] = self.t_shell_lower
        x[END_NODES] = self.t_end
        x[BLANKET0:ROTOR] = self.t_blanket
        x[ROTOR] = self.t_rotor
        return x

    @classmethod
    def from_vector(cls, x, sim_time=0.0):
        x = np.asarray(x, dtype=float)
        if x.shape != (N_STATE,):
            raise ShapeError(f"state vector must have {N_STATE} entries, got {x.shape}")
        return cls(
            t_shell_upper=x[1 : N_HALF + 1].copy(),
            t_shell_lower=x[CHAIN + 1 : CHAIN + N_HALF + 1].copy(),
            t_blanket=x[BLANKET0:ROTOR].copy(),
            t_rotor=float(x[ROTOR]),
            t_end=x[END_NODES].copy(),
            sim_time=float(sim_time),
        )

    @property
    def t_zone(self):
        """Measured zone temperatures, upper zones first."""
        return np.concatenate((self.t_shell_upper, self.t_shell_lower))


def state_labels():
    """Human-readable name of every state-vector entry."""
    labels = [""] * N_STATE
    for half, off in (("upper", 0), ("lower", CHAIN)):
        labels[off] = f"t_end_{half}[left]"
        labels[off + CHAIN - 1] = f"t_end_{half}[right]"
        for i in range(N_HALF):
            labels[off + 1 + i] = f"t_shell_{half}[{i}]"
    for z in range(N_ZONES):
        labels[BLANKET0 + z] = f"t_blanket[{z}]"
    labels[ROTOR] = "t_rotor"
    return labels


def check_command(on):
    on = np.asarray(on)
    if on.shape[-1] != N_ZONES:
        raise ShapeError(f"heater command must have {N_ZONES} entries")
    if on.dtype != bool:
        if not np.all((on == 0) | (on == 1)):
            raise ParameterError("heater commands are strictly binary")
        on = on.astype(bool)
    return on


def contact_heat_flow(t_a, t_b, h_c, a_s):
    """Heat flow from surface A to surface B through a contact resistance."""
    if np.any(np.asarray(h_c) <= 0.0) or np.any(np.asarray(a_s) <= 0.0):
        raise ParameterError("contact coefficient and area must be positive")
    return a_s * (np.asarray(t_a) - np.asarray(t_b)) / (1.0 / np.asarray(h_c))


def assemble_shell_system(n_nodes, h):
    """Discrete diffusion operator for one Neumann-bounded chain.

    Returns ``(D, w, mask)`` such that the semi-discrete heat equation reads
    ``w * dT/dt / alpha = D @ T + mask * qdot / k``: ``D`` has boundary rows
    ``[-h, h] / h^2`` and interior rows ``[1, -2, 1] / h^2``, ``w`` is one
    except the half-cell weight ``h / 2`` at the two ends, and ``mask`` zeroes
    external heat input at the end nodes.
    """
    if n_nodes < 3:
        raise ParameterError("a chain needs at least 3 nodes")
    D = np.zeros((n_nodes, n_nodes))
    idx = np.arange(1, n_nodes - 1)
    D[idx, idx - 1] = 1.0
    D[idx, idx] = -2.0
    D[idx, idx + 1] = 1.0
    D[0, 0], D[0, 1] = -h, h
    D[-1, -1], D[-1, -2] = -h, h
    D /= h * h
    w = np.ones(n_nodes)
    w[0] = w[-1] = h / 2.0
    mask = np.ones(n_nodes)
    mask[0] = mask[-1] = 0.0
    return D, w, mask


@dataclass
class LinearSystem:
    """``C dx/dt = K x + b0 + B_heat @ u`` for heater command ``u``."""

    C: np.ndarray  # capacities, J/K
    K: np.ndarray  # W/K
    b0: np.ndarray  # W
    B_heat: np.ndarray  # (N_STATE, 20) W per unit command
    g_ambient: np.ndarray  # per-state conductance to ambient, W/K


def _chain_capacity_and_conduction(params, volumes):
    """Capacities and axial conduction matrix for one chain of zone volumes."""
    h = params.h_node
    # end caps inherit the adjacent zone's cross-section
    vol = np.concatenate(([volumes[0]], volumes, [volumes[-1]]))
    D, w, _ = assemble_shell_system(CHAIN, h)
    rho_c = params.k_cond / params.alpha
    # w/alpha * dT/dt = D T  ->  (rho c V w / h) dT/dt = k (V/h) D T ... scaled per node
    cap = rho_c * vol * np.where(w == 1.0, 1.0, 0.5)
    cross = vol / h
    # conductance between neighbours from the mean cross-section
    g_link = params.k_cond * 0.5 * (cross[:-1] + cross[1:]) / h
    L = np.zeros((CHAIN, CHAIN))
    i = np.arange(CHAIN - 1)
    L[i, i] -= g_link
    L[i + 1, i + 1] -= g_link
    L[i, i + 1] += g_link
    L[i + 1, i] += g_link
    return cap, L


def linear_system(params):
    """Assemble the full coupled linear system for ``params``."""
    C = np.zeros(N_STATE)
    K = np.zeros((N_STATE, N_STATE))
    for off, sl in ((0, slice(0, N_HALF)), (CHAIN, slice(N_HALF, N_ZONES))):
        cap, L = _chain_capacity_and_conduction(params, params.node_volume[sl])
        C[off : off + CHAIN] = cap
        K[off : off + CHAIN, off : off + CHAIN] = L
    C[BLANKET0:ROTOR] = params.blanket_heat_capacity
    C[ROTOR] = params.rotor_heat_capacity

    g_amb = np.zeros(N_STATE)
    g_amb[ZONE_NODE] = params.g_shell_ambient
    g_amb[BLANKET0:ROTOR] = params.g_blanket_ambient

    def couple(i, j, g):
        K[i, i] -= g
        K[j, j] -= g
        K[i, j] += g
        K[j, i] += g

    blankets = np.arange(BLANKET0, ROTOR)
    for z in range(N_ZONES):
        couple(ZONE_NODE[z], blankets[z], params.g_contact[z])
        couple(ZONE_NODE[z], ROTOR, params.g_rotor[z])
    K[np.arange(N_STATE), np.arange(N_STATE)] -= g_amb
    b0 = g_amb * params.t_ambient
    B_heat = np.zeros((N_STATE, N_ZONES))
    B_heat[blankets, np.arange(N_ZONES)] = params.heater_power
    return LinearSystem(C=C, K=K, b0=b0, B_heat=B_heat, g_ambient=g_amb)


def external_heat_input(x, u, params):
    """Per-node external heat into every shell node of both chains, W.

    Shape ``(2, 12)``; end entries are exactly zero by construction.
    """
    x = np.asarray(x, dtype=float)
    out = np.zeros((2, CHAIN))
    zone_t = x[ZONE_NODE]
    q = (
        contact_heat_flow(x[BLANKET0:ROTOR], zone_t, params.h_contact, params.a_contact)
        - params.g_shell_ambient * (zone_t - params.t_ambient)
        + params.g_rotor * (x[ROTOR] - zone_t)
    )
    out[0, 1 : N_HALF + 1] = q[:N_HALF]
    out[1, 1 : N_HALF + 1] = q[N_HALF:]
    return out


def stored_energy(x, params, system=None):
    """Sum of capacity times temperature above ambient, J."""
    system = system or linear_system(params)
    return float(system.C @ (np.asarray(x) - params.t_ambient))


def ambient_loss(x, params, system=None):
    """Total heat lost to ambient at state ``x``, W."""
    system = system or linear_system(params)
    return float(system.g_ambient @ (np.asarray(x) - params.t_ambient))


def heater_input(u, params):
    return float(params.heater_power @ check_command(u).astype(float))


class Propagator:
    """Backward-Euler propagator for fixed parameters and step size.

    One step solves ``(C - dt K) x' = C x + dt (b0 + B_heat u)``; this class
    stores the solved form ``x' = Phi x + psi + Gamma u``.  ``substeps`` folds
    several identical steps under a constant command into one map.
    """

    def __init__(self, params, dt, substeps=1):
        if not dt > 0.0:
            raise ParameterError(f"dt must be positive, got {dt}")
        if int(substeps) < 1:
            raise ParameterError("substeps must be >= 1")
        self.params = params
        self.dt = float(dt)
        self.substeps = int(substeps)
        self.system = sys_ = linear_system(params)
        M = np.diag(sys_.C) - self.dt * sys_.K
        Minv = np.linalg.inv(M)
        phi = Minv * sys_.C[None, :]
        psi = self.dt * Minv @ sys_.b0
        gamma = self.dt * Minv @ sys_.B_heat
        self.phi1, self.psi1, self.gamma1 = phi, psi, gamma
        Phi, Psi, Gam = phi, psi, gamma
        for _ in range(self.substeps - 1):
            Phi, Psi, Gam = phi @ Phi, phi @ Psi + psi, phi @ Gam + gamma
        self.phi, self.psi, self.gamma = Phi, Psi, Gam

    def advance(self, x, u):
        """Advance ``substeps`` steps under command ``u``."""
        return self.phi @ x + self.psi + self.gamma @ np.asarray(u, dtype=float)

    def step_once(self, x, u):
        return self.phi1 @ x + self.psi1 + self.gamma1 @ np.asarray(u, dtype=float)


def check_finite(x, scenario=None):
    x = np.asarray(x)
    bad = ~np.isfinite(x)
    if np.any(bad):
        flat = np.flatnonzero(bad.reshape(-1, N_STATE).any(axis=0))
        name = state_labels()[int(flat[0])]
        raise NumericalInstabilityError(
            f"non-finite temperature in {name}", component=name, scenario=scenario
        )


_PROP_CACHE: dict = {}


def step(state, cmd, params, dt):
    """Advance ``state`` by one backward-Euler step of length ``dt``."""
    if not dt > 0.0:
        raise ParameterError(f"dt must be positive, got {dt}")
    u = check_command(cmd).astype(float)
    key = (id(params), float(dt))
    prop = _PROP_CACHE.get(key)
    if prop is None or prop.params is not params:
        if len(_PROP_CACHE) > 32:
            _PROP_CACHE.clear()
        prop = _PROP_CACHE[key] = Propagator(params, dt)
    x0 = state.to_vector()
    check_finite(x0)  # name a bad input before the solve smears it over every state
    x = prop.step_once(x0, u)
    check_finite(x)
    return PlantState.from_vector(x, state.sim_time + dt)


@dataclass(frozen=True)
class ProfileSpec:
    """Axial temperature profile at the moment of shutdown.

    A parabola peaking at ``peak_temperature`` at normalized position
    ``peak_position`` and falling to ``end_temperature`` at the farther end.
    ``None`` temperatures default to ambient.
    """

    peak_temperature: float | None = 565.0 + KELVIN
    peak_position: float = 0.5
    end_temperature: float | None = 520.0 + KELVIN

    def temperatures(self, xi, t_ambient):
        peak = t_ambient if self.peak_temperature is None else self.peak_temperature
        end = peak if self.end_temperature is None else self.end_temperature
        if peak < t_ambient:
            raise ParameterError(f"peak temperature {peak} K is below ambient {t_ambient} K")
        if not (t_ambient <= end <= peak):
            raise ParameterError("end temperature must lie between ambient and the peak")
        if not 0.0 <= self.peak_position <= 1.0:
            raise ParameterError("peak_position must be within [0, 1]")
        span = max(self.peak_position, 1.0 - self.peak_position)
        s = (np.clip(xi, 0.0, 1.0) - self.peak_position) / span
        return peak - (peak - end) * s**2


def zone_positions():
    """Normalized axial position of each chain node (ends clipped to 0 and 1)."""
    return np.concatenate(([0.0], (np.arange(N_HALF) + 0.5) / N_HALF, [1.0]))


def initial_hot_shutdown_state(params, profile_spec=None):
    """Equilibrated post-shutdown state with identical upper and lower halves."""
    profile_spec = profile_spec or ProfileSpec()
    chain = profile_spec.temperatures(zone_positions(), params.t_ambient)
    x = np.empty(N_STATE)
    x[:CHAIN] = chain
    x[CHAIN : 2 * CHAIN] = chain
    x[BLANKET0:ROTOR] = x[ZONE_NODE]
    x[ROTOR] = float(profile_spec.temperatures(np.array([0.5]), params.t_ambient)[0])
    return PlantState.from_vector(x, 0.0)
