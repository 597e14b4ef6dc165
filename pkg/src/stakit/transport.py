"""Excitation-free trap transport by inverse engineering.

Rigid harmonic transport designs a classical trajectory q_c(t) first
(quintic, with position, velocity and acceleration pinned at both ends)
and deduces the trap trajectory from Newton's equation for the driven
oscillator,

    q0 = q_c + (q_c'' + g) / omega0^2 .

The residual oscillation amplitude after any trap motion is the modulus
of the Fourier transform of the trap velocity at the trap frequency; the
designed trajectory makes it vanish identically.

For arbitrary (non-harmonic) traps the same goal is met by rigidly moving
the trap while applying a compensating linear potential -x q0''(t).

Units: hbar = m = 1.
"""

import numpy as np

from .errors import EdgeMismatch, VariantMismatch
from .interpolant import PolyFunction, smoothstep_poly
from .numerics import cumulative_uniform, simpson_uniform
from .timegrid import SampledFunction, TimeGrid
from .wavesim import WaveState, fidelity, oscillator_eigenstate, propagate, stationary_state

RIGID = "rigid-harmonic"
COMPENSATING = "compensating-force"
UNITARY_ALT = "unitary-alternative"


class TransportProtocol:
    """Transport design: classical trajectory, trap trajectory, metadata."""

    def __init__(self, qc, q0, omega0, d, tf, g=0.0, variant=RIGID):
        self.qc = qc                    # PolyFunction classical trajectory
        self.q0_fn = q0                 # SampledFunction trap trajectory
        self.omega0 = float(omega0)
        self.d = float(d)
        self.tf = float(tf)
        self.g = float(g)
        self.variant = variant

    def q0(self, t):
        """Trap trajectory; analytic when built from a polynomial q_c."""
        if self.qc is not None and self.variant == RIGID:
            return self.qc(t, 0) + (self.qc(t, 2) + self.g) / self.omega0**2
        return self.q0_fn(t)

    def q0_dot(self, t):
        if self.qc is not None and self.variant == RIGID:
            return self.qc(t, 1) + self.qc(t, 3) / self.omega0**2
        return self.q0_fn.derivative(1)(t)

    @property
    def max_excursion(self):
        """Largest |q0 - q_c| along the protocol."""
        t = self.q0_fn.grid.times
        return float(np.max(np.abs(self.q0_fn.values - self.qc(t, 0))))

    @property
    def exits_range(self):
        lo, hi = min(0.0, self.d), max(0.0, self.d)
        q = self.q0_fn.values
        tol = 1e-12 * max(1.0, abs(self.d))
        return bool(q.min() < lo - tol or q.max() > hi + tol)

    def potential(self):
        """Moving-trap potential (plus gravity when g != 0)."""
        def v(x, t):
            out = 0.5 * self.omega0**2 * (x - self.q0(t)) ** 2
            if self.g != 0.0:
                out = out + self.g * x
            return out
        return v

    def to_json(self):
        return {
            "variant": self.variant,
            "omega0": self.omega0,
            "d": self.d,
            "tf": self.tf,
            "g": self.g,
            "qc_coeffs": list(map(float, self.qc.coeffs)) if self.qc else None,
            "q0_samples": list(map(float, self.q0_fn.values)),
        }

    @classmethod
    def from_json(cls, data):
        grid = TimeGrid(data["tf"], len(data["q0_samples"]))
        q0 = SampledFunction(grid, np.asarray(data["q0_samples"], dtype=float))
        qc = None
        if data.get("qc_coeffs") is not None:
            qc = PolyFunction(np.asarray(data["qc_coeffs"], dtype=float), data["tf"])
        return cls(qc, q0, data["omega0"], data["d"], data["tf"],
                   g=data.get("g", 0.0), variant=data.get("variant", RIGID))


class ExcitationReport:
    """Residual classical oscillation left by a trap trajectory."""

    def __init__(self, amplitude, omega0, spectrum_omega, spectrum):
        self.amplitude = float(amplitude)
        self.omega0 = float(omega0)
        self.residual_energy = 0.5 * omega0**2 * self.amplitude**2
        self.spectrum_omega = spectrum_omega
        self.spectrum = spectrum


def design_transport(d, tf, omega0, g=0.0, n_grid=2001):
    """Quintic shortcut transport over distance d in time tf."""
    if tf <= 0 or omega0 <= 0:
        raise ValueError("tf and omega0 must be positive")
    qc = smoothstep_poly(tf, 0.0, d, smoothness=2)
    grid = TimeGrid(tf, n_grid)
    t = grid.times
    q0_vals = qc(t, 0) + (qc(t, 2) + g) / omega0**2
    q0 = SampledFunction(grid, q0_vals)
    return TransportProtocol(qc, q0, omega0, d, tf, g=g, variant=RIGID)


def _velocity_samples(traj, n_quad):
    """(times, qdot) for a protocol, polynomial, or sampled trajectory."""
    if isinstance(traj, TransportProtocol):
        grid = TimeGrid(traj.tf, n_quad)
        return grid.times, np.asarray(traj.q0_dot(grid.times), dtype=float)
    if isinstance(traj, PolyFunction):
        grid = TimeGrid(traj.tf, n_quad)
        return grid.times, np.asarray(traj(grid.times, 1), dtype=float)
    dense = TimeGrid(traj.grid.tf, n_quad)
    spl = traj.derivative(1)
    return dense.times, np.asarray(spl(dense.times), dtype=float)


def fourier_amplitude(traj, omega0, n_quad=4097, n_spectrum=257):
    """|F[q0'](omega0)| and the surrounding spectrum, by quadrature.

    The trap velocity vanishes outside [0, tf], so the Fourier integral
    reduces to the finite window.
    """
    t, qdot = _velocity_samples(traj, n_quad)
    dt = t[1] - t[0]

    def transform(w):
        ker = qdot * np.exp(-1j * w * t)
        return simpson_uniform(ker.real, dt) + 1j * simpson_uniform(ker.imag, dt)

    amp = abs(transform(omega0))
    ws = np.linspace(0.0, 4.0 * omega0, n_spectrum)
    spec = np.array([abs(transform(w)) for w in ws])
    return ExcitationReport(amp, omega0, ws, spec)


def transported_state(protocol, n, grid, t=None):
    """Closed-form transported wavefunction of initial mode n at time t.

    psi_n(x, t) = Phi_n(x - q_c) exp[i q_c'(x - q_c)]
                  exp[i int_0^t L dt'] exp[-i E_n t],
    with L = q_c'^2/2 - omega0^2 (q_c - q0)^2/2 - g q_c the trap-frame
    Lagrangian (including the c-number piece of the moving-trap potential),
    exact for the potential omega0^2 (x - q0)^2 / 2 + g x.
    """
    if protocol.variant != RIGID:
        raise VariantMismatch("closed form holds for rigid harmonic transport")
    if t is None:
        t = protocol.tf
    tg = TimeGrid(max(t, 1e-12), 2001)
    tt = tg.times
    qc = np.asarray(protocol.qc(tt, 0), dtype=float)
    qc_d = np.asarray(protocol.qc(tt, 1), dtype=float)
    q0 = qc + (np.asarray(protocol.qc(tt, 2), dtype=float) + protocol.g) / protocol.omega0**2
    lagr = 0.5 * qc_d**2 - 0.5 * protocol.omega0**2 * (qc - q0) ** 2 - protocol.g * qc
    action = cumulative_uniform(lagr, tg.dt)[-1]
    e_n = (n + 0.5) * protocol.omega0
    qc_t = float(protocol.qc(t, 0))
    qcd_t = float(protocol.qc(t, 1))
    base = oscillator_eigenstate(grid, protocol.omega0, n, center=qc_t)
    phase = np.exp(1j * (qcd_t * (grid.x - qc_t) + action - e_n * t))
    return WaveState(grid, base.psi * phase, t=t)


def compensating_force(trap, q0):
    """Potential callback V(x, t) = U(x - q0(t)) - x q0''(t).

    ``trap`` is the rigid trap profile U(y); ``q0`` a PolyFunction or
    SampledFunction trajectory. The linear term compensates the inertial
    force in the trap frame, preserving the trap-frame wavefunction up to
    a global phase for arbitrary U. Returns (potential, info) where info
    flags a "clean catch" (zero edge velocities) versus a launching
    protocol.
    """
    if isinstance(q0, PolyFunction):
        pos = lambda t: q0(t, 0)
        acc = lambda t: q0(t, 2)
        v_edges = (q0(0.0, 1), q0(q0.tf, 1))
        scale = max(1.0, float(np.max(np.abs(q0.coeffs))))
    else:
        pos = q0
        acc_fn = q0.derivative(2)
        acc = acc_fn
        vel = q0.derivative(1)
        v_edges = (vel(0.0), vel(q0.grid.tf))
        scale = max(1.0, float(np.max(np.abs(q0.values))))
    clean = bool(abs(v_edges[0]) < 1e-9 * scale and abs(v_edges[1]) < 1e-9 * scale)

    def potential(x, t):
        return trap(x - pos(t)) - x * acc(t)

    return potential, {"clean_catch": clean, "edge_velocities": v_edges}


def unitary_alternative_transport(q0, omega0):
    """Alternative trap trajectory q0' = q0 + q0''/omega0^2.

    Produces the same final state as the compensating-force drive at the
    cost of a larger excursion, harmonic traps only. Requires q0'' to
    vanish at both edges so the endpoints coincide.
    """
    if isinstance(q0, PolyFunction):
        grid = TimeGrid(q0.tf, 2001)
        acc = np.asarray(q0(grid.times, 2), dtype=float)
        vals = np.asarray(q0(grid.times, 0), dtype=float)
    else:
        grid = q0.grid
        acc = q0.derivative(2).values
        vals = q0.values
    scale = max(1.0, float(np.max(np.abs(acc))))
    if abs(acc[0]) > 1e-9 * scale or abs(acc[-1]) > 1e-9 * scale:
        raise EdgeMismatch("q0'' must vanish at t = 0 and t = tf")
    return SampledFunction(grid, vals + acc / omega0**2)


def transport_energy_bound(d, tf, omega0):
    """Lower bound 6 d^2/(tf^4 omega0^2) on the time-averaged excess
    potential energy of any transport mode."""
    return 6.0 * d**2 / (tf**4 * omega0**2)


def anharmonic_scan(protocol, alpha, g1, grid, dt, n_samples=129):
    """Final fidelity of the harmonic shortcut under a quartic perturbation.

    The trap actually applied is omega0^2 [(x-q0)^2 + alpha (x-q0)^4] / 2
    with nonlinear coupling g1; initial and target states are the
    stationary states of the perturbed trap at rest (target = initial
    displaced by d).
    """
    w2 = protocol.omega0**2

    def perturbed(x, t):
        y = x - protocol.q0(t)
        return 0.5 * w2 * (y**2 + alpha * y**4)

    v_static = lambda x: 0.5 * w2 * ((x - protocol.q0(0.0)) ** 2
                                     + alpha * (x - protocol.q0(0.0)) ** 4)
    if g1 == 0.0 and alpha == 0.0:
        initial = oscillator_eigenstate(grid, protocol.omega0, 0, center=protocol.q0(0.0))
    else:
        initial = stationary_state(grid, v_static, g1=g1)
    shift = protocol.q0(protocol.tf) - protocol.q0(0.0)
    target = translate(initial, shift)
    final, _ = propagate(initial, perturbed, protocol.tf, dt, g1=g1,
                         n_samples=n_samples)
    return fidelity(final, target)


def translate(state, delta):
    """Rigid displacement by delta via the spectral shift theorem."""
    from scipy.fft import fft, ifft
    psi = ifft(fft(state.psi) * np.exp(-1j * state.grid.k * delta))
    return WaveState(state.grid, psi, t=state.t, g1=state.g1)
