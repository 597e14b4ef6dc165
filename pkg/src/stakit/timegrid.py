"""Uniform time grids and sampled functions of time.

A :class:`SampledFunction` carries values on a uniform grid together with
interpolation and fourth-order finite-difference derivative access. Values
are frozen after construction so instances can be shared between threads.
"""

import numpy as np
from scipy.interpolate import CubicSpline

from .numerics import derivative_uniform, simpson_uniform


class TimeGrid:
    """Uniform discretization of [0, t_f] with ``n`` samples."""

    def __init__(self, tf, n):
        if tf <= 0:
            raise ValueError("tf must be positive")
        if n < 2:
            raise ValueError("need at least two samples")
        self.tf = float(tf)
        self.n = int(n)
        self.times = np.linspace(0.0, self.tf, self.n)
        self.times.setflags(write=False)

    @property
    def dt(self):
        return self.tf / (self.n - 1)

    def __eq__(self, other):
        return (isinstance(other, TimeGrid)
                and other.tf == self.tf and other.n == self.n)

    def __repr__(self):
        return f"TimeGrid(tf={self.tf}, n={self.n})"


class SampledFunction:
    """Real or complex function of time sampled on a :class:`TimeGrid`."""

    def __init__(self, grid, values):
        values = np.asarray(values)
        if values.shape != (grid.n,):
            raise ValueError("values shape does not match grid")
        self.grid = grid
        self.values = values.copy()
        self.values.setflags(write=False)
        self._spline = None

    def _ensure_spline(self):
        if self._spline is None:
            if np.iscomplexobj(self.values):
                re = CubicSpline(self.grid.times, self.values.real)
                im = CubicSpline(self.grid.times, self.values.imag)
                self._spline = lambda t: re(t) + 1j * im(t)
            else:
                self._spline = CubicSpline(self.grid.times, self.values)
        return self._spline

    def __call__(self, t):
        return self._ensure_spline()(t)

    def derivative(self, order=1):
        """Fourth-order finite-difference derivative, same grid."""
        vals = self.values
        if np.iscomplexobj(vals):
            der = (derivative_uniform(vals.real, self.grid.dt, order)
                   + 1j * derivative_uniform(vals.imag, self.grid.dt, order))
        else:
            der = derivative_uniform(vals, self.grid.dt, order)
        return SampledFunction(self.grid, der)

    def integral(self):
        """Composite-Simpson integral over the full window."""
        return simpson_uniform(self.values, self.grid.dt)

    def time_average(self):
        return self.integral() / self.grid.tf

    def min(self):
        return float(np.min(self.values.real))

    def max(self):
        return float(np.max(self.values.real))


def sample(fn, grid):
    """Sample a callable ``fn(t)`` on ``grid`` into a SampledFunction."""
    try:
        vals = np.asarray(fn(grid.times))
    except (TypeError, ValueError):
        vals = None
    if vals is None or vals.shape != (grid.n,):
        vals = np.asarray([fn(t) for t in grid.times])
    return SampledFunction(grid, vals)
