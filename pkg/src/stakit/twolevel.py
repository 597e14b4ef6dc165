"""Two-level population-inversion protocols and their error sensitivities.

The Hamiltonian convention (hbar = 1) is

    H0 = (1/2) [[-Delta,  Omega_R - i Omega_I],
                [ Omega_R + i Omega_I,  Delta]],

i.e. H0 = X sx + Y sy + Z sz with X = Omega_R/2, Y = Omega_I/2,
Z = -Delta/2; :func:`cartesian_to_rabi` / :func:`rabi_to_cartesian` are the
single source of truth for that factor-of-two convention.

Protocol families: flat pi pulse, Landau-Zener sweeps (flat or smooth
edged), counterdiabatic-assisted sweeps, invariant-engineered pulses from
auxiliary angles (Theta, alpha, gamma), plus the noise-optimal and
systematic-optimal members of that family. Amplitude-noise and systematic
errors are scored both by closed-form quadrature and by finite differences
of a double-commutator master equation.

State convention: |1> = (1, 0) start, |2> = (0, 1) target; P2 is the
excited-state population.
"""

import numpy as np
from scipy.integrate import solve_ivp

from .errors import DegenerateGap, EdgeMismatch, ShootingFailed
from .interpolant import PolyFunction, smoothstep_poly
from .numerics import simpson_uniform, su2_propagate
from .timegrid import SampledFunction, TimeGrid

SX = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SY = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SZ = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)


def cartesian_to_rabi(x, y, z):
    """(X, Y, Z) Cartesian components -> (Omega_R, Omega_I, Delta)."""
    return 2.0 * np.asarray(x), 2.0 * np.asarray(y), -2.0 * np.asarray(z)


def rabi_to_cartesian(omega_r, omega_i, delta):
    """(Omega_R, Omega_I, Delta) -> (X, Y, Z) Cartesian components."""
    return (np.asarray(omega_r) / 2.0, np.asarray(omega_i) / 2.0,
            -np.asarray(delta) / 2.0)


class TimeFunc:
    """Function of time with analytic derivatives, fns[k](t) = k-th order."""

    def __init__(self, *fns):
        self.fns = fns

    def __call__(self, t, k=0):
        if k >= len(self.fns):
            raise ValueError(f"derivative order {k} not available")
        return self.fns[k](t)


def const_fn(c):
    c = float(c)
    return TimeFunc(lambda t: np.full_like(np.asarray(t, dtype=float), c),
                    lambda t: np.zeros_like(np.asarray(t, dtype=float)))


class AuxiliaryAngles:
    """Invariant parameterization angles Theta, alpha, gamma on [0, T].

    Each angle is callable as angle(t, k) with k = 0, 1. Inversion
    protocols satisfy Theta(0) = 0 and Theta(T) = pi.
    """

    def __init__(self, theta, alpha, gamma, T):
        self.theta = theta
        self.alpha = alpha
        self.gamma = gamma
        self.T = float(T)

    def is_inversion(self, tol=1e-8):
        return (abs(float(self.theta(0.0))) < tol
                and abs(float(self.theta(self.T)) - np.pi) < tol)


class TwoLevelProtocol:
    """Sampled (Omega_R, Omega_I, Delta) triple on a common time grid.

    Protocols built analytically also carry continuous closures in
    ``funcs`` so propagators can evaluate midpoints exactly; loaded
    protocols fall back to cubic splines of the samples.
    """

    def __init__(self, grid, omega_r, omega_i, delta, family="custom",
                 funcs=None, meta=None):
        self.grid = grid
        self.omega_r = SampledFunction(grid, np.asarray(omega_r, dtype=float))
        self.omega_i = SampledFunction(grid, np.asarray(omega_i, dtype=float))
        self.delta = SampledFunction(grid, np.asarray(delta, dtype=float))
        self.family = family
        self.funcs = funcs or {}
        self.meta = meta or {}

    @property
    def T(self):
        return self.grid.tf

    def _fn(self, name):
        if name in self.funcs:
            return self.funcs[name]
        return getattr(self, name)

    def components(self, t):
        """Cartesian (X, Y, Z) arrays at times ``t``."""
        omr = self._fn("omega_r")(t)
        omi = self._fn("omega_i")(t)
        dlt = self._fn("delta")(t)
        return rabi_to_cartesian(omr, omi, dlt)

    def hamiltonians(self, t):
        """Stacked 2x2 Hermitian matrices H0(t)."""
        x, y, z = self.components(t)
        return (np.multiply.outer(x, SX) + np.multiply.outer(y, SY)
                + np.multiply.outer(z, SZ))

    def pulse_area(self, n_quad=4001):
        ts = np.linspace(0.0, self.T, n_quad)
        mod = np.hypot(self._fn("omega_r")(ts), self._fn("omega_i")(ts))
        return simpson_uniform(mod, ts[1] - ts[0])

    def to_json(self):
        return {
            "T": self.T,
            "grid_n": self.grid.n,
            "omega_r": list(map(float, self.omega_r.values)),
            "omega_i": list(map(float, self.omega_i.values)),
            "delta": list(map(float, self.delta.values)),
            "family": self.family,
        }

    @classmethod
    def from_json(cls, data):
        grid = TimeGrid(data["T"], data["grid_n"])
        return cls(grid, data["omega_r"], data["omega_i"], data["delta"],
                   family=data.get("family", "custom"))


class SensitivityReport:
    """Noise and systematic sensitivities with their computation method."""

    def __init__(self, q_n, q_s, method):
        self.q_n = float(q_n)
        self.q_s = float(q_s)
        self.method = method

    def __repr__(self):
        return (f"SensitivityReport(q_n={self.q_n:.6g}, q_s={self.q_s:.6g}, "
                f"method={self.method!r})")


# --- protocol factories ------------------------------------------------------

def pi_pulse(T, phase=0.0, area=np.pi, n_grid=1001):
    """Flat resonant pulse Omega_c = e^{i phase} * area / T, Delta = 0."""
    if T <= 0:
        raise ValueError("T must be positive")
    grid = TimeGrid(T, n_grid)
    amp = area / T
    omr = np.full(grid.n, amp * np.cos(phase))
    omi = np.full(grid.n, amp * np.sin(phase))
    funcs = {"omega_r": lambda t: np.full_like(np.asarray(t, float), amp * np.cos(phase)),
             "omega_i": lambda t: np.full_like(np.asarray(t, float), amp * np.sin(phase)),
             "delta": lambda t: np.zeros_like(np.asarray(t, float)),
             "omega_r_dot": lambda t: np.zeros_like(np.asarray(t, float)),
             "delta_dot": lambda t: np.zeros_like(np.asarray(t, float))}
    return TwoLevelProtocol(grid, omr, omi, np.zeros(grid.n), family="pi-pulse",
                            funcs=funcs, meta={"phase": phase, "area": area})


def landau_zener(omega_r0, rate, T, n_grid=2001, envelope=None):
    """Landau-Zener sweep Delta = rate (t - T/2) with coupling omega_r0.

    ``envelope`` (callable of t, values in [0, 1], with derivative as
    envelope(t, 1)) optionally shapes the coupling; the flat sweep is the
    textbook protocol, the sin^2 envelope of :func:`smooth_landau_zener`
    makes the bare states exact eigenstates at both edges.
    """
    grid = TimeGrid(T, n_grid)

    def omr(t):
        t = np.asarray(t, dtype=float)
        base = np.full_like(t, float(omega_r0))
        return base * envelope(t) if envelope is not None else base

    def omr_dot(t):
        t = np.asarray(t, dtype=float)
        if envelope is None:
            return np.zeros_like(t)
        return float(omega_r0) * envelope(t, 1)

    delta = lambda t: rate * (np.asarray(t, dtype=float) - T / 2.0)
    delta_dot = lambda t: np.full_like(np.asarray(t, dtype=float), float(rate))
    funcs = {"omega_r": omr, "omega_i": lambda t: np.zeros_like(np.asarray(t, float)),
             "delta": delta, "omega_r_dot": omr_dot, "delta_dot": delta_dot}
    proto = TwoLevelProtocol(grid, omr(grid.times), np.zeros(grid.n),
                             delta(grid.times), family="landau-zener",
                             funcs=funcs,
                             meta={"omega_r0": omega_r0, "rate": rate})
    omega = np.hypot(proto.omega_r.values, proto.delta.values)
    with np.errstate(divide="ignore", invalid="ignore"):
        omega_a = ((proto.omega_r.values * delta_dot(grid.times)
                    - omr_dot(grid.times) * proto.delta.values) / omega**2)
    proto.meta["adiabaticity"] = float(np.max(np.abs(omega_a) / (2.0 * omega)))
    return proto


class _SinSqEnvelope:
    def __init__(self, T):
        self.T = T

    def __call__(self, t, k=0):
        t = np.asarray(t, dtype=float)
        if k == 0:
            return np.sin(np.pi * t / self.T) ** 2
        if k == 1:
            return (np.pi / self.T) * np.sin(2.0 * np.pi * t / self.T)
        raise ValueError("derivative order not available")


def smooth_landau_zener(omega_r0, rate, T, n_grid=2001):
    """Landau-Zener sweep with a sin^2 coupling envelope.

    The coupling vanishes at both edges, so H0 commutes with sz there and
    the bare states are exact instantaneous eigenstates; counterdiabatic
    assistance then inverts the population exactly.
    """
    proto = landau_zener(omega_r0, rate, T, n_grid=n_grid, envelope=_SinSqEnvelope(T))
    proto.family = "landau-zener-smooth"
    return proto


def counterdiabatic_term(protocol, n_grid=None):
    """Counterdiabatic coupling Omega_a = (Omega_R Delta' - Omega_R' Delta)/Omega^2.

    Requires Omega_I = 0 and a nonvanishing gap Omega = sqrt(Delta^2 +
    Omega_R^2). Returns (omega_a SampledFunction, assisted protocol) where
    the assisted protocol has Omega_I = Omega_a added to the reference.
    """
    if float(np.max(np.abs(protocol.omega_i.values))) > 1e-12:
        raise ValueError("counterdiabatic construction assumes Omega_I = 0")
    grid = protocol.grid if n_grid is None else TimeGrid(protocol.T, n_grid)
    ts = grid.times
    omr_f = protocol._fn("omega_r")
    dlt_f = protocol._fn("delta")
    omr = np.asarray(omr_f(ts), dtype=float)
    dlt = np.asarray(dlt_f(ts), dtype=float)
    if "omega_r_dot" in protocol.funcs:
        omr_d = np.asarray(protocol.funcs["omega_r_dot"](ts), dtype=float)
    else:
        omr_d = protocol.omega_r.derivative(1)(ts)
    if "delta_dot" in protocol.funcs:
        dlt_d = np.asarray(protocol.funcs["delta_dot"](ts), dtype=float)
    else:
        dlt_d = protocol.delta.derivative(1)(ts)
    gap2 = omr**2 + dlt**2
    if np.min(gap2) < 1e-24:
        raise DegenerateGap("Omega vanishes on the grid")
    omega_a = (omr * dlt_d - omr_d * dlt) / gap2

    def omega_a_fn(t):
        t = np.asarray(t, dtype=float)
        r, d = np.asarray(omr_f(t), float), np.asarray(dlt_f(t), float)
        if "omega_r_dot" in protocol.funcs and "delta_dot" in protocol.funcs:
            rd = np.asarray(protocol.funcs["omega_r_dot"](t), float)
            dd = np.asarray(protocol.funcs["delta_dot"](t), float)
            return (r * dd - rd * d) / (r**2 + d**2)
        return _spline_eval(grid, omega_a, t)

    funcs = dict(protocol.funcs)
    funcs["omega_i"] = omega_a_fn
    assisted = TwoLevelProtocol(grid, omr, omega_a, dlt,
                                family=protocol.family + "+cd", funcs=funcs,
                                meta=dict(protocol.meta))
    assisted.meta["max_omega_a"] = float(np.max(np.abs(omega_a)))
    assisted.meta["max_omega_r"] = float(np.max(np.abs(omr)))
    return SampledFunction(grid, omega_a), assisted


def _spline_eval(grid, values, t):
    return SampledFunction(grid, values)(t)


# --- invariant-based engineering ---------------------------------------------

def invariant_inverse(angles, n_grid=2001, family="invariant"):
    """Protocol realizing the invariant eigenstate ride set by the angles.

    Omega_R = cos(alpha) sin(Theta) gamma' - sin(alpha) Theta'
    Omega_I = sin(alpha) sin(Theta) gamma' + cos(alpha) Theta'
    Delta   = -cos(Theta) gamma' - alpha'
    """
    if not angles.is_inversion():
        raise ValueError("need Theta(0) = 0 and Theta(T) = pi")
    th, al, ga = angles.theta, angles.alpha, angles.gamma

    def omr(t):
        return (np.cos(al(t)) * np.sin(th(t)) * ga(t, 1)
                - np.sin(al(t)) * th(t, 1))

    def omi(t):
        return (np.sin(al(t)) * np.sin(th(t)) * ga(t, 1)
                + np.cos(al(t)) * th(t, 1))

    def dlt(t):
        return -np.cos(th(t)) * ga(t, 1) - al(t, 1)

    grid = TimeGrid(angles.T, n_grid)
    funcs = {"omega_r": omr, "omega_i": omi, "delta": dlt}
    return TwoLevelProtocol(grid, omr(grid.times), omi(grid.times),
                            dlt(grid.times), family=family, funcs=funcs)


def flat_pi_angles(T):
    theta = PolyFunction([0.0, np.pi], T)
    return AuxiliaryAngles(theta, const_fn(-np.pi / 2.0), const_fn(0.0), T)


def approx_noise_angles(T):
    """Closed-form approximation to the noise-optimal inversion profile."""
    w = 2.0 * np.pi / T
    theta = TimeFunc(
        lambda t: np.pi * np.asarray(t, float) / T - np.sin(w * np.asarray(t, float)) / 12.0,
        lambda t: np.pi / T - (w / 12.0) * np.cos(w * np.asarray(t, float)),
        lambda t: (w**2 / 12.0) * np.sin(w * np.asarray(t, float)))
    return AuxiliaryAngles(theta, const_fn(-np.pi / 4.0), const_fn(0.0), T)


def systematic_angles(T, n=1, theta=None):
    """gamma = n (2 Theta - sin 2 Theta) family, which zeroes q_S exactly.

    The inversion profile Theta is free; the default is the quintic
    smoothstep scaled to [0, pi].
    """
    if theta is None:
        base = smoothstep_poly(T, 0.0, np.pi, smoothness=2)
        theta = base
    gamma = TimeFunc(
        lambda t: n * (2.0 * theta(t, 0) - np.sin(2.0 * theta(t, 0))),
        lambda t: n * (2.0 - 2.0 * np.cos(2.0 * theta(t, 0))) * theta(t, 1))
    return AuxiliaryAngles(theta, const_fn(np.pi / 4.0), gamma, T)


# --- propagation --------------------------------------------------------------

def propagate_unitary(protocol, psi0=(1.0, 0.0), n_steps=16384, history=False):
    """Exact-exponential midpoint stepping of the Schrodinger equation.

    Norm is preserved to rounding. Returns (psi_T, P2) or, with history,
    (psi_T, P2, times, trajectory).
    """
    dt = protocol.T / n_steps
    t_mid = (np.arange(n_steps) + 0.5) * dt
    x, y, z = protocol.components(t_mid)
    c0 = np.zeros(n_steps)
    if history:
        psi, traj = su2_propagate(psi0, c0, x, y, z, dt, history=True)
        times = np.arange(n_steps + 1) * dt
        return psi, float(np.abs(psi[1]) ** 2), times, traj
    psi = su2_propagate(psi0, c0, x, y, z, dt)
    return psi, float(np.abs(psi[1]) ** 2)


def _stacked_hamiltonians(protocol, ts):
    """(H0, H1, H2R, H2I) stacks at times ts; H1 = H0 with Delta = 0,
    H2R/H2I keep only the real/imaginary Rabi quadrature."""
    x, y, z = protocol.components(ts)
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    z = np.asarray(z, float)
    h0 = (np.multiply.outer(x, SX) + np.multiply.outer(y, SY)
          + np.multiply.outer(z, SZ))
    h1 = np.multiply.outer(x, SX) + np.multiply.outer(y, SY)
    h2r = np.multiply.outer(x, SX)
    h2i = np.multiply.outer(y, SY)
    return h0, h1, h2r, h2i


def propagate_master(protocol, lam2=0.0, beta=0.0, rho0=None, n_steps=4000):
    """Density-matrix propagation with amplitude noise and systematic error.

    d rho/dt = -i [H0 + beta H1, rho]
               - (lam2/2) ([H2R, [H2R, rho]] + [H2I, [H2I, rho]])

    ``lam2`` (noise strength, units of time) and ``beta`` (dimensionless)
    may be scalars or equal-length arrays (batched propagation). Returns
    (rho_T, P2) with leading batch axis squeezed for scalar inputs.
    """
    lam2_arr = np.atleast_1d(np.asarray(lam2, dtype=float))
    beta_arr = np.atleast_1d(np.asarray(beta, dtype=float))
    scalar = np.isscalar(lam2) or np.asarray(lam2).ndim == 0
    if scalar and not (np.isscalar(beta) or np.asarray(beta).ndim == 0):
        scalar = False
    b = max(lam2_arr.size, beta_arr.size)
    lam2_arr = np.broadcast_to(lam2_arr, (b,)).astype(float)
    beta_arr = np.broadcast_to(beta_arr, (b,)).astype(float)
    if rho0 is None:
        rho0 = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)
    rho = np.broadcast_to(rho0, (b, 2, 2)).astype(complex).copy()

    dt = protocol.T / n_steps
    ts = np.linspace(0.0, protocol.T, 2 * n_steps + 1)
    h0, h1, h2r, h2i = _stacked_hamiltonians(protocol, ts)
    lam = lam2_arr[:, None, None]
    bet = beta_arr[:, None, None]

    def deriv(r, j):
        h = h0[j] + bet * h1[j]
        out = -1j * (h @ r - r @ h)
        for hn in (h2r[j], h2i[j]):
            inner = hn @ r - r @ hn
            out = out - 0.5 * lam * (hn @ inner - inner @ hn)
        return out

    for i in range(n_steps):
        j0, jm, j1 = 2 * i, 2 * i + 1, 2 * i + 2
        k1 = deriv(rho, j0)
        k2 = deriv(rho + 0.5 * dt * k1, jm)
        k3 = deriv(rho + 0.5 * dt * k2, jm)
        k4 = deriv(rho + dt * k3, j1)
        rho = rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    p2 = rho[:, 1, 1].real.copy()
    if scalar:
        return rho[0], float(p2[0])
    return rho, p2


# --- sensitivities -------------------------------------------------------------

def noise_sensitivity(angles, n_quad=8193):
    """Closed-form amplitude-noise sensitivity q_N by quadrature.

    q_N = (1/4) int_0^T [ (cos^2 Th + cos^2 al sin^2 Th)(m sin al - cos al Th')^2
                        + (cos^2 Th + sin^2 al sin^2 Th)(m cos al + sin al Th')^2 ] dt
    with m = -gamma' sin Theta.
    """
    ts = np.linspace(0.0, angles.T, n_quad)
    th = np.asarray(angles.theta(ts, 0), float)
    thd = np.asarray(angles.theta(ts, 1), float)
    al = np.asarray(angles.alpha(ts, 0), float)
    gad = np.asarray(angles.gamma(ts, 1), float)
    m = -gad * np.sin(th)
    c2, s2 = np.cos(th) ** 2, np.sin(th) ** 2
    ca, sa = np.cos(al), np.sin(al)
    integ = 0.25 * ((c2 + ca**2 * s2) * (m * sa - ca * thd) ** 2
                    + (c2 + sa**2 * s2) * (m * ca + sa * thd) ** 2)
    return float(simpson_uniform(integ, ts[1] - ts[0]))


def systematic_sensitivity(angles, n_quad=8193):
    """Closed-form systematic sensitivity q_S = |int e^{-i gamma} Th' sin^2 Th dt|^2."""
    ts = np.linspace(0.0, angles.T, n_quad)
    th = np.asarray(angles.theta(ts, 0), float)
    thd = np.asarray(angles.theta(ts, 1), float)
    ga = np.asarray(angles.gamma(ts, 0), float)
    ker = np.exp(-1j * ga) * thd * np.sin(th) ** 2
    dt = ts[1] - ts[0]
    val = simpson_uniform(ker.real, dt) + 1j * simpson_uniform(ker.imag, dt)
    return float(np.abs(val) ** 2)


def sensitivity_closed_form(angles):
    return SensitivityReport(noise_sensitivity(angles),
                             systematic_sensitivity(angles), "closed-form")


def sensitivity_finite_difference(protocol, lam2_probe=None, beta2_probe=1e-4,
                                  n_steps=4000):
    """Sensitivities by Richardson-extrapolated master-equation probes.

    Two probe strengths (h and h/2) cancel the next-order contamination:
    q(h) = (P2(0) - P2(h))/h obeys q(h) = q + c h, so 2 q(h/2) - q(h) = q.
    """
    T = protocol.T
    if lam2_probe is None:
        lam2_probe = 1e-4 * T
    lam2s = np.array([0.0, lam2_probe, 0.5 * lam2_probe, 0.0, 0.0])
    betas = np.array([0.0, 0.0, 0.0, np.sqrt(beta2_probe),
                      np.sqrt(0.5 * beta2_probe)])
    _, p2 = propagate_master(protocol, lam2s, betas, n_steps=n_steps)
    base = p2[0]
    qn_h = (base - p2[1]) / lam2_probe
    qn_h2 = (base - p2[2]) / (0.5 * lam2_probe)
    qs_h = (base - p2[3]) / beta2_probe
    qs_h2 = (base - p2[4]) / (0.5 * beta2_probe)
    return SensitivityReport(2.0 * qn_h2 - qn_h, 2.0 * qs_h2 - qs_h,
                             "finite-difference")


# --- optimal protocols ----------------------------------------------------------

def _noise_optimal_rhs(t, y):
    th, v = y
    return [v, np.sin(2.0 * th) * v**2 / (3.0 + np.cos(2.0 * th))]


def optimal_noise_protocol(T, n_grid=2001, tol=1e-12):
    """Noise-optimal inversion: solve (3 + cos 2Th) Th'' = sin(2Th) Th'^2.

    The boundary-value problem Theta(0) = 0, Theta(T) = pi is solved by
    bisection shooting on Theta'(0) in [pi/(2T), 4 pi/T]. With alpha =
    -pi/4 and gamma = 0 the assembled pulse has Omega_R = Omega_I =
    Theta'/sqrt(2) and Delta = 0.
    """

    def final_theta(v0):
        sol = solve_ivp(_noise_optimal_rhs, (0.0, T), [0.0, v0],
                        method="DOP853", rtol=1e-12, atol=1e-14)
        return sol.y[0, -1] - np.pi

    lo, hi = np.pi / (2.0 * T), 4.0 * np.pi / T
    f_lo, f_hi = final_theta(lo), final_theta(hi)
    if f_lo * f_hi > 0:
        raise ShootingFailed("could not bracket Theta'(0)")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if final_theta(mid) * f_lo <= 0:
            hi = mid
        else:
            lo = mid
    v0 = 0.5 * (lo + hi)
    sol = solve_ivp(_noise_optimal_rhs, (0.0, T), [0.0, v0], method="DOP853",
                    rtol=1e-12, atol=1e-14, dense_output=True)

    theta = TimeFunc(lambda t: sol.sol(t)[0], lambda t: sol.sol(t)[1],
                     lambda t: np.asarray(_noise_optimal_rhs(t, sol.sol(t))[1]))
    angles = AuxiliaryAngles(theta, const_fn(-np.pi / 4.0), const_fn(0.0), T)
    protocol = invariant_inverse(angles, n_grid=n_grid, family="noise-optimal")
    protocol.meta["theta_dot0"] = v0
    protocol.meta["q_n"] = noise_sensitivity(angles)
    protocol.meta["peak_rabi_T"] = float(np.abs(theta(T / 2.0, 1)) / np.sqrt(2.0) * T)
    return angles, protocol


def optimal_systematic_protocol(T, n=1, n_grid=2001, theta=None):
    """Systematic-error-immune protocol from gamma = n (2 Theta - sin 2 Theta)."""
    if n < 1 or int(n) != n:
        raise ValueError("n must be a positive integer")
    angles = systematic_angles(T, n=n, theta=theta)
    protocol = invariant_inverse(angles, n_grid=n_grid, family="systematic-optimal")
    protocol.meta["n"] = int(n)
    protocol.meta["q_s"] = systematic_sensitivity(angles)
    return angles, protocol


def error_robustness_scan(T, lambdas, betas, n_steps=3000):
    """P2 of the noise-optimal and systematic-optimal protocols on a
    (lambda, beta) grid. Returns (P2_noise_opt, P2_sys_opt) with shape
    (len(lambdas), len(betas))."""
    _, proto_n = optimal_noise_protocol(T)
    _, proto_s = optimal_systematic_protocol(T)
    lam_g, bet_g = np.meshgrid(np.asarray(lambdas, float),
                               np.asarray(betas, float), indexing="ij")
    lam2 = (lam_g**2).ravel()
    bet = bet_g.ravel()
    _, p2_n = propagate_master(proto_n, lam2, bet, n_steps=n_steps)
    _, p2_s = propagate_master(proto_s, lam2, bet, n_steps=n_steps)
    shape = lam_g.shape
    return p2_n.reshape(shape), p2_s.reshape(shape)


# --- angle-ODE consistency -------------------------------------------------------

def integrate_angles(protocol, t0, t1, theta0, alpha0, gamma0, rtol=1e-10):
    """Integrate the invariant angle ODEs along a given protocol.

    Theta' = Omega_I cos(alpha) - Omega_R sin(alpha)
    alpha' = -Delta - cot(Theta) (Omega_R cos(alpha) + Omega_I sin(alpha))
    gamma' = (Omega_R cos(alpha) + Omega_I sin(alpha)) / sin(Theta)

    The equations are singular at Theta = 0, pi, so integrate on an
    interior window [t0, t1]. Returns the solve_ivp solution.
    """
    omr = protocol._fn("omega_r")
    omi = protocol._fn("omega_i")
    dlt = protocol._fn("delta")

    def rhs(t, y):
        th, al, ga = y
        r, i, d = float(omr(t)), float(omi(t)), float(dlt(t))
        proj = r * np.cos(al) + i * np.sin(al)
        return [i * np.cos(al) - r * np.sin(al),
                -d - proj / np.tan(th),
                proj / np.sin(th)]

    return solve_ivp(rhs, (t0, t1), [theta0, alpha0, gamma0], method="DOP853",
                     rtol=rtol, atol=1e-12, dense_output=True)


# --- alternative pictures ---------------------------------------------------------

class AlternativeTwoLevel:
    """Reference cd-assisted protocol and its rotated-picture alternative."""

    def __init__(self, reference, alternative, phi):
        self.reference = reference
        self.alternative = alternative
        self.phi = phi


def unitary_alternative_twolevel(x0, z0, T, n_grid=4001):
    """Rotated-picture protocol removing the sigma_y counterdiabatic term.

    Inputs are the Cartesian components X0(t, k), Z0(t, k) (k = 0, 1) of
    the reference H0 = X0 sx + Z0 sz. The reference shortcut is
    H0 + (Theta0'/2) sy; the alternative keeps the sx/sz structure:

        phi = arctan(Theta0' / 2 X0)   (continuous branch),
        P   = sqrt(X0^2 + (Theta0'/2)^2),
        H'  = (Z0 - phi'/2) sz + P sx.

    Raises EdgeMismatch unless phi vanishes at both edges (which requires
    Theta0' = 0, X0 != 0 there); then both protocols share initial and
    final Hamiltonians and final states.
    """
    grid = TimeGrid(T, n_grid)
    ts = grid.times
    x = np.asarray(x0(ts, 0), float)
    z = np.asarray(z0(ts, 0), float)
    xd = np.asarray(x0(ts, 1), float)
    zd = np.asarray(z0(ts, 1), float)
    r2 = x**2 + z**2
    if np.min(r2) < 1e-24:
        raise DegenerateGap("R0 vanishes on the grid")
    theta_dot = (xd * z - x * zd) / r2
    phi_raw = np.arctan2(theta_dot / 2.0, x)
    phi = np.unwrap(2.0 * phi_raw) / 2.0
    phi = phi - 2.0 * np.pi * np.round(phi[0] / (2.0 * np.pi))
    if abs(phi[0]) > 1e-8 or abs(phi[-1]) > 1e-8:
        raise EdgeMismatch("phi must vanish at t = 0 and t = tf")
    phi_fn = SampledFunction(grid, phi)
    phi_dot = phi_fn.derivative(1).values
    p = np.sqrt(x**2 + (theta_dot / 2.0) ** 2)

    omr_ref, omi_ref, dlt_ref = cartesian_to_rabi(x, theta_dot / 2.0, z)
    reference = TwoLevelProtocol(grid, omr_ref, omi_ref, dlt_ref,
                                 family="cd-reference")
    omr_alt, omi_alt, dlt_alt = cartesian_to_rabi(p, np.zeros(grid.n),
                                                  z - phi_dot / 2.0)
    alternative = TwoLevelProtocol(grid, omr_alt, omi_alt, dlt_alt,
                                   family="unitary-alternative")
    return AlternativeTwoLevel(reference, alternative, phi_fn)


class SuperadiabaticResult:
    """First-order superadiabatic correction and diagnostics."""

    def __init__(self, protocol, hcd1, hcd0, k1_edge_norms, basis):
        self.protocol = protocol        # H0 + H_cd^(1) as a TwoLevelProtocol
        self.hcd1 = hcd1                # (nt, 2, 2) matrices
        self.hcd0 = hcd0
        self.k1_edge_norms = k1_edge_norms
        self.basis = basis              # instantaneous eigenvectors of H0


def superadiabatic_cd1(x0, z0, T, n_grid=4001, edge_tol=1e-8):
    """First-order superadiabatic counterdiabatic term for a two-level H0.

    Builds the adiabatic frame A0 from tracked eigenvectors of H0, the
    frame Hamiltonian H1 = A0^dag (H0 - K0) A0 with K0 = i A0' A0^dag,
    then the next frame's coupling K1 and the Schrodinger-picture term
    H_cd^(1) = A0 K1 A0^dag. Requires K1 to vanish at both edges (within
    ``edge_tol``) for the shortcut property.
    """
    from .cd import SampledHamiltonian, tracked_eigensystem, matrix_derivative

    grid = TimeGrid(T, n_grid)
    ts = grid.times
    x = np.asarray(x0(ts, 0), float)
    z = np.asarray(z0(ts, 0), float)
    h0 = np.multiply.outer(x, SX) + np.multiply.outer(z, SZ)
    ham = SampledHamiltonian(grid, h0)
    _, vecs = tracked_eigensystem(ham)
    a0 = vecs @ vecs[0].conj().T
    a0_dag = np.conj(np.transpose(a0, (0, 2, 1)))
    a0_dot = matrix_derivative(a0, grid.dt)
    k0 = 1j * a0_dot @ a0_dag
    k0 = 0.5 * (k0 + np.conj(np.transpose(k0, (0, 2, 1))))
    h1 = a0_dag @ (h0 - k0) @ a0
    ham1 = SampledHamiltonian(grid, 0.5 * (h1 + np.conj(np.transpose(h1, (0, 2, 1)))))
    _, vecs1 = tracked_eigensystem(ham1)
    a1 = vecs1 @ vecs1[0].conj().T
    a1_dag = np.conj(np.transpose(a1, (0, 2, 1)))
    a1_dot = matrix_derivative(a1, grid.dt)
    k1 = 1j * a1_dot @ a1_dag
    k1 = 0.5 * (k1 + np.conj(np.transpose(k1, (0, 2, 1))))
    hcd1 = a0 @ k1 @ a0_dag
    k1_edges = (float(np.linalg.norm(k1[0], 2)), float(np.linalg.norm(k1[-1], 2)))
    if max(k1_edges) > edge_tol:
        from .errors import BoundaryConditionViolated
        raise BoundaryConditionViolated(
            f"K1 edge norms {k1_edges} exceed {edge_tol}")

    total = h0 + hcd1
    xs = total[:, 0, 1].real
    ys = -total[:, 0, 1].imag
    zs = 0.5 * (total[:, 0, 0] - total[:, 1, 1]).real
    omr, omi, dlt = cartesian_to_rabi(xs, ys, zs)
    protocol = TwoLevelProtocol(grid, omr, omi, dlt, family="superadiabatic-1")
    return SuperadiabaticResult(protocol, hcd1, k0, k1_edges, vecs)
