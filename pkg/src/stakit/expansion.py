"""Harmonic-trap expansion and compression protocols by Ermakov inversion.

The Ermakov equation

    rho'' + omega^2(t) rho = omega0^2 / rho^3

links the scaling factor rho(t) of the expanding modes to the trap
frequency schedule. Fixing rho first (a quintic satisfying commutation
boundary conditions at both ends) and solving for omega^2(t) yields a
frequency schedule that transfers every trap eigenstate to its scaled
counterpart in an arbitrary finite time. The squared frequency may turn
negative along the way (a transient parabolic repeller); protocols carry
an explicit flag when that happens.

Units: hbar = m = 1; frequencies are angular.
"""

import numpy as np
from scipy.integrate import solve_ivp

from .errors import BlowUp, NonPositiveCoupling, NonPositiveScaling, PoleInRamp
from .interpolant import PolyFunction, smoothstep_poly
from .numerics import cumulative_uniform
from .timegrid import SampledFunction, TimeGrid

_RHO_MIN, _RHO_MAX = 1e-6, 1e6


class ExpansionProtocol:
    """Designed expansion: scaling factor, frequency schedule, endpoints."""

    def __init__(self, rho, omega0, omegaf, tf, omega2, imaginary):
        self.rho = rho                  # PolyFunction or None (loaded protocols)
        self.omega0 = float(omega0)
        self.omegaf = float(omegaf)
        self.tf = float(tf)
        self.omega2_fn = omega2         # SampledFunction of squared frequency
        self.imaginary = bool(imaginary)

    @property
    def gamma(self):
        return np.sqrt(self.omega0 / self.omegaf)

    def omega2(self, t):
        return self.omega2_fn(t)

    def potential(self):
        """Time-dependent trap potential callback for the wave propagator."""
        return lambda x, t: 0.5 * self.omega2_fn(t) * x**2

    def to_json(self):
        return {
            "omega0": self.omega0,
            "omegaf": self.omegaf,
            "tf": self.tf,
            "rho_coeffs": list(map(float, self.rho.coeffs)) if self.rho else None,
            "omega2_samples": list(map(float, self.omega2_fn.values)),
            "imaginary_flag": self.imaginary,
        }

    @classmethod
    def from_json(cls, data):
        grid = TimeGrid(data["tf"], len(data["omega2_samples"]))
        omega2 = SampledFunction(grid, np.asarray(data["omega2_samples"], dtype=float))
        rho = None
        if data.get("rho_coeffs") is not None:
            rho = PolyFunction(np.asarray(data["rho_coeffs"], dtype=float), data["tf"])
        return cls(rho, data["omega0"], data["omegaf"], data["tf"], omega2,
                   data["imaginary_flag"])


def invert_ermakov(rho, omega0, grid):
    """Frequency schedule omega^2(t) = omega0^2/rho^4 - rho''/rho.

    ``rho`` must support rho(t, k) for k = 0 and 2 (PolyFunction does);
    rho'' comes from the analytic derivative, never finite differences, so
    the schedule stays smooth at the endpoints. Returns the schedule and a
    flag marking a transient repulsive (omega^2 < 0) interval.
    """
    t = grid.times
    rho_v = np.asarray(rho(t, 0), dtype=float)
    rho_dd = np.asarray(rho(t, 2), dtype=float)
    if np.any(rho_v <= 0):
        raise NonPositiveScaling("rho must stay positive on the grid")
    w2 = omega0**2 / rho_v**4 - rho_dd / rho_v
    fn = SampledFunction(grid, w2)
    return fn, bool(np.min(w2) < 0)


def forward_ermakov(omega2, omega0, grid=None, rtol=1e-11, atol=1e-12):
    """Integrate rho'' = omega0^2/rho^3 - omega^2(t) rho from rho(0)=1, rho'(0)=0."""
    if grid is None:
        grid = omega2.grid
    w2 = omega2 if callable(omega2) else (lambda t: float(omega2))

    def rhs(t, y):
        rho, rdot = y
        return [rdot, omega0**2 / rho**3 - w2(t) * rho]

    def too_small(t, y):
        return y[0] - _RHO_MIN

    def too_big(t, y):
        return _RHO_MAX - y[0]

    too_small.terminal = True
    too_big.terminal = True
    sol = solve_ivp(rhs, (0.0, grid.tf), [1.0, 0.0], t_eval=grid.times,
                    method="DOP853", rtol=rtol, atol=atol,
                    events=(too_small, too_big))
    if sol.status == 1 or sol.t[-1] < grid.tf:
        raise BlowUp(f"rho left ({_RHO_MIN}, {_RHO_MAX}) near t = {sol.t[-1]:.4g}")
    return SampledFunction(grid, sol.y[0])


def design_expansion(omega0, omegaf, tf, n_grid=2001):
    """Quintic-rho expansion protocol from omega0 to omegaf in time tf."""
    if omega0 <= 0 or omegaf <= 0 or tf <= 0:
        raise ValueError("omega0, omegaf and tf must be positive")
    gamma = np.sqrt(omega0 / omegaf)
    rho = smoothstep_poly(tf, 1.0, gamma, smoothness=2)
    grid = TimeGrid(tf, n_grid)
    omega2, imaginary = invert_ermakov(rho, omega0, grid)
    return ExpansionProtocol(rho, omega0, omegaf, tf, omega2, imaginary)


def fast_adiabatic_ramp(omega0, omegaf, tf, grid=None):
    """Uniform-adiabaticity ramp: omega-dot/omega^2 held constant.

    omega(t) = omega0 / [1 - (omegaf - omega0) t / (tf omegaf)]; the endpoint
    values are omega0 and omegaf by construction.
    """
    if grid is None:
        grid = TimeGrid(tf, 1001)
    t = grid.times
    denom = 1.0 - (omegaf - omega0) * t / (tf * omegaf)
    if np.min(denom) <= 0:
        raise PoleInRamp("ramp denominator vanishes inside [0, tf]")
    return SampledFunction(grid, omega0 / denom)


class EnergyBound:
    """Short-time lower bound on the time-averaged energy of mode n."""

    def __init__(self, n, omegaf, tf, omega0=None):
        self.n = int(n)
        self.omegaf = float(omegaf)
        self.tf = float(tf)
        self.bound = (2 * n + 1) / (2.0 * omegaf * tf**2)
        self.omega0 = omega0
        if omega0 is not None:
            self.tf_ratio = tf * np.sqrt(omega0 * omegaf)
            self.gamma = np.sqrt(omega0 / omegaf)
            # Asymptotic regime of the bound: tf << 1/sqrt(omega0 omegaf), gamma >> 1.
            self.in_regime = bool(self.tf_ratio < 0.5 and self.gamma > 3.0)
        else:
            self.tf_ratio = None
            self.gamma = None
            self.in_regime = None

    def min_time(self, e_avg):
        """Smallest tf compatible with a time-averaged energy budget e_avg."""
        return np.sqrt((2 * self.n + 1) / (2.0 * self.omegaf * e_avg))


def energy_bound(n, omegaf, tf, omega0=None):
    return EnergyBound(n, omegaf, tf, omega0=omega0)


def aa_bound_check(dh, tf):
    """Anandan-Aharonov diagnostic: time-averaged Delta-H times tf over h/4.

    Returns (ratio, applicable); with h = 2 pi the bound requires the ratio
    to be >= 1 whenever the evolution connects sufficiently distinct states.
    A vanishing Delta-H (stationary evolution) makes the bound vacuous and
    is flagged as not applicable.
    """
    dh_bar = dh.time_average()
    ratio = dh_bar * tf / (np.pi / 2.0)
    applicable = bool(dh_bar * tf > 1e-9)
    return float(ratio), applicable


class GpeScalingSchedule:
    """Scaling-consistent Gross-Pitaevskii drive derived from a protocol."""

    def __init__(self, dimension, variant, g, tau, omega2, mu=None, omega_perp=None):
        self.dimension = int(dimension)
        self.variant = variant
        self.g = g                      # SampledFunction coupling schedule
        self.tau = tau                  # SampledFunction scaled time
        self.omega2 = omega2            # SampledFunction squared frequency
        self.mu = mu
        self.omega_perp = omega_perp


def gpe_schedule(protocol, dimension, g0, variant="full", mu=None):
    """Coupling and frequency schedules keeping the scaling ansatz exact.

    variant "full": same Ermakov frequency schedule as the linear protocol
    with g_D(t) = g_D(0) / rho^(2-D) (time independent when D = 2) and
    tau = int dt/rho^2. variant "thomas-fermi": coupling held constant,
    frequency re-derived from rho'' + omega^2 rho = omega0^2 / rho^(D+1),
    tau = int dt/rho^D.
    """
    if dimension not in (1, 2, 3):
        raise ValueError("dimension must be 1, 2 or 3")
    if variant not in ("full", "thomas-fermi"):
        raise ValueError("variant must be 'full' or 'thomas-fermi'")
    grid = protocol.omega2_fn.grid
    t = grid.times
    rho_v = np.asarray(protocol.rho(t, 0), dtype=float)
    if variant == "full":
        g_vals = g0 / rho_v ** (2 - dimension)
        tau_vals = cumulative_uniform(1.0 / rho_v**2, grid.dt)
        omega2 = protocol.omega2_fn
    else:
        rho_dd = np.asarray(protocol.rho(t, 2), dtype=float)
        w2 = protocol.omega0**2 / rho_v ** (dimension + 2) - rho_dd / rho_v
        omega2 = SampledFunction(grid, w2)
        g_vals = np.full(grid.n, float(g0))
        tau_vals = cumulative_uniform(1.0 / rho_v**dimension, grid.dt)
    return GpeScalingSchedule(dimension, variant,
                              SampledFunction(grid, g_vals),
                              SampledFunction(grid, tau_vals),
                              omega2, mu=mu)


def transverse_confinement(g1, omega_perp0):
    """Transverse-frequency schedule realizing a quasi-1D coupling ramp g1(t).

    omega_perp^2(t) = omega_perp^2(0) [g1/g1(0)]^2 + g1''/(2 g1)
                      - (3/4)(g1'/g1)^2.

    Returns the squared schedule and a flag marking omega_perp^2 < 0.
    """
    vals = np.asarray(g1.values, dtype=float)
    if np.any(vals <= 0):
        raise NonPositiveCoupling("g1 must stay positive")
    gd = g1.derivative(1).values
    gdd = g1.derivative(2).values
    w2 = (omega_perp0**2 * (vals / vals[0]) ** 2
          + 0.5 * gdd / vals - 0.75 * (gd / vals) ** 2)
    return SampledFunction(g1.grid, w2), bool(np.min(w2) < 0)


class LRMode:
    """Exact expanding mode of an expansion protocol.

    The mode is the n-th invariant eigenstate dressed with its phase:
    psi_n(x, t) = exp(i alpha_n) exp(i rho' x^2 / 2 rho) Phi_n(x/rho) / sqrt(rho),
    with alpha_n = -(n + 1/2) omega0 * int_0^t dt'/rho^2.
    """

    def __init__(self, protocol, n):
        self.protocol = protocol
        self.n = int(n)
        self.lam = (n + 0.5) * protocol.omega0
        grid = protocol.omega2_fn.grid
        rho_v = np.asarray(protocol.rho(grid.times, 0), dtype=float)
        tau = cumulative_uniform(1.0 / rho_v**2, grid.dt)
        self.alpha = SampledFunction(grid, -self.lam * tau)

    def wavefunction(self, x, t):
        rho = float(self.protocol.rho(t, 0))
        rho_d = float(self.protocol.rho(t, 1))
        omega0 = self.protocol.omega0
        sigma = x / rho
        xi = np.sqrt(omega0) * sigma
        coeffs = np.zeros(self.n + 1)
        coeffs[self.n] = 1.0
        herm = np.polynomial.hermite.hermval(xi, coeffs)
        norm = (omega0 / np.pi) ** 0.25 / np.sqrt(2.0**self.n * _factorial(self.n))
        phi = norm * herm * np.exp(-0.5 * xi**2)
        phase = np.exp(1j * (float(self.alpha(t)) + 0.5 * rho_d * x**2 / rho))
        return phase * phi / np.sqrt(rho)


def _factorial(n):
    out = 1.0
    for i in range(2, n + 1):
        out *= i
    return out


def lr_mode(protocol, n):
    return LRMode(protocol, n)


def mode_energy(protocol, n, t):
    """Closed-form instantaneous energy of expanding mode n.

    E_n(t) = (2n+1)/(4 omega0) [rho'^2 + omega^2 rho^2 + omega0^2/rho^2].
    """
    rho = np.asarray(protocol.rho(t, 0), dtype=float)
    rho_d = np.asarray(protocol.rho(t, 1), dtype=float)
    w2 = protocol.omega2_fn(t)
    w0 = protocol.omega0
    return (2 * n + 1) / (4.0 * w0) * (rho_d**2 + w2 * rho**2 + w0**2 / rho**2)


def alternative_frequency_squared(omega):
    """Squared frequency of the rescaled-picture protocol for a given omega(t).

    omega'^2 = omega^2 - 3 omega'^2_dot/(4 omega^2) + omega_ddot/(2 omega),
    evaluated samplewise; may be negative (transient repeller).
    """
    w = np.asarray(omega.values, dtype=float)
    wd = omega.derivative(1).values
    wdd = omega.derivative(2).values
    w2p = w**2 - 0.75 * wd**2 / w**2 + 0.5 * wdd / w
    return SampledFunction(omega.grid, w2p)
