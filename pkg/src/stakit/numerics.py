"""Shared numerical kernels: quadrature, finite differences, SU(2) stepping.

Natural units hbar = m = 1 are used throughout the toolkit.
"""

import math

import numpy as np
from scipy.integrate import simpson


def simpson_uniform(y, dx):
    """Composite Simpson integral of uniformly sampled data."""
    return simpson(y, dx=dx)


def simpson_average(y, dx, duration):
    """Time average of a uniformly sampled signal over ``duration``."""
    return simpson_uniform(y, dx) / duration


def fd_weights(offsets, order):
    """Finite-difference weights on integer ``offsets`` for a derivative.

    Solves the Vandermonde moment conditions sum_j w_j m_j^k = k! delta_{k,order},
    exact for polynomials up to degree ``len(offsets) - 1``.
    """
    offsets = np.asarray(offsets, dtype=float)
    n = len(offsets)
    rhs = np.zeros(n)
    rhs[order] = math.factorial(order)
    vander = np.vander(offsets, n, increasing=True).T
    return np.linalg.solve(vander, rhs)


def derivative_uniform(y, dx, order=1):
    """Fourth-order finite-difference derivative of uniformly sampled data.

    Central five-point stencils in the interior, one-sided stencils of the
    same accuracy at the four boundary samples. ``order`` is 1 or 2.
    """
    y = np.asarray(y, dtype=float)
    n = y.size
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    if n < 6:
        raise ValueError("need at least 6 samples for fourth-order stencils")
    out = np.empty_like(y)
    central = fd_weights(np.arange(-2, 3), order)
    out[2:-2] = sum(w * y[2 + m: n - 2 + m] for m, w in zip(range(-2, 3), central))
    width = 6 if order == 2 else 5
    for i in (0, 1):
        w = fd_weights(np.arange(width) - i, order)
        out[i] = w @ y[:width]
    for i in (n - 2, n - 1):
        w = fd_weights(np.arange(-width + 1, 1) + (n - 1 - i), order)
        out[i] = w @ y[-width:]
    return out / dx**order


def cumulative_uniform(y, dx):
    """Cumulative integral on a uniform grid, F[0] = 0.

    Uses cumulative Simpson when scipy provides it, falling back to the
    trapezoid rule otherwise.
    """
    try:
        from scipy.integrate import cumulative_simpson
        out = np.empty(len(y))
        out[0] = 0.0
        out[1:] = cumulative_simpson(y, dx=dx)
        return out
    except ImportError:  # scipy < 1.12
        from scipy.integrate import cumulative_trapezoid
        return cumulative_trapezoid(y, dx=dx, initial=0.0)


def spectral_antiderivative(f, dx):
    """Antiderivative of a sampled function via FFT, zero at the left edge.

    Exact (to rounding) for smooth data that decays at both ends of the
    window; the nonzero-mean part is integrated as an explicit linear term.
    """
    f = np.asarray(f, dtype=float)
    n = f.size
    k = 2.0 * np.pi * np.fft.fftfreq(n, d=dx)
    fk = np.fft.fft(f)
    mean = fk[0].real / n
    with np.errstate(divide="ignore", invalid="ignore"):
        gk = np.where(k != 0.0, fk / (1j * k), 0.0)
    g = np.fft.ifft(gk).real
    x_rel = np.arange(n) * dx
    g = g + mean * x_rel
    return g - g[0]


def su2_step(psi, c0, vx, vy, vz, dt):
    """Advance a two-spinor by the exact exponential of H = c0*I + v.sigma."""
    a, b = psi
    vnorm = np.sqrt(vx * vx + vy * vy + vz * vz)
    theta = vnorm * dt
    if vnorm < 1e-300:
        phase = np.exp(-1j * c0 * dt)
        return (phase * a, phase * b)
    c, s = np.cos(theta), np.sin(theta)
    nx, ny, nz = vx / vnorm, vy / vnorm, vz / vnorm
    na = nz * a + (nx - 1j * ny) * b
    nb = (nx + 1j * ny) * a - nz * b
    phase = np.exp(-1j * c0 * dt)
    return (phase * (c * a - 1j * s * na), phase * (c * b - 1j * s * nb))


def su2_propagate(psi0, c0, vx, vy, vz, dt, history=False):
    """Propagate a two-spinor through midpoint-sampled Hamiltonian steps.

    ``c0, vx, vy, vz`` are arrays of per-step midpoint values of the
    Hamiltonian decomposition H = c0*I + vx*sx + vy*sy + vz*sz. Each step
    applies the exact 2x2 exponential, so the evolution is exactly unitary
    and second-order accurate in dt (midpoint Magnus).
    """
    a, b = complex(psi0[0]), complex(psi0[1])
    n = len(vx)
    traj = np.empty((n + 1, 2), dtype=complex) if history else None
    if history:
        traj[0] = (a, b)
    for i in range(n):
        a, b = su2_step((a, b), float(c0[i]), float(vx[i]), float(vy[i]),
                        float(vz[i]), dt)
        if history:
            traj[i + 1] = (a, b)
    out = np.array([a, b])
    if history:
        return out, traj
    return out
