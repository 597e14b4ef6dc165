"""Polynomial interpolants satisfying prescribed boundary derivatives.

Every inverse-engineering recipe in the toolkit starts the same way: pick a
smooth function of time that matches given values and derivatives at t = 0
and t = t_f. This module builds the minimal-degree polynomial doing so.
The polynomial is represented in the scaled variable s = t/t_f, which keeps
the boundary linear system well conditioned for any duration.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidSpec, OutOfDomain, SingularSystem

_COND_LIMIT = 1e12
_DOMAIN_SLACK = 1e-12


@dataclass(frozen=True)
class BoundarySpec:
    """Boundary conditions at t = 0 (``left``) and t = t_f (``right``).

    Each side is a sequence of ``(derivative_order, value)`` pairs; orders
    are with respect to physical time t.
    """

    tf: float
    left: tuple = field(default=())
    right: tuple = field(default=())

    def __post_init__(self):
        if not self.tf > 0:
            raise InvalidSpec("duration tf must be positive")
        object.__setattr__(self, "left", tuple((int(k), float(v)) for k, v in self.left))
        object.__setattr__(self, "right", tuple((int(k), float(v)) for k, v in self.right))
        for side, name in ((self.left, "left"), (self.right, "right")):
            orders = [k for k, _ in side]
            if any(k < 0 for k in orders):
                raise InvalidSpec(f"negative derivative order on {name} side")
            if len(set(orders)) != len(orders):
                raise InvalidSpec(f"duplicate derivative order on {name} side")
        if self.n_conditions < 1:
            raise InvalidSpec("at least one boundary condition required")

    @property
    def n_conditions(self):
        return len(self.left) + len(self.right)


class PolyFunction:
    """Polynomial of time stored as coefficients in s = t/t_f.

    Immutable; evaluation at any derivative order converts back to physical
    time through the chain-rule factor t_f**(-k).
    """

    def __init__(self, coeffs, tf):
        if not tf > 0:
            raise InvalidSpec("duration tf must be positive")
        self.coeffs = np.asarray(coeffs, dtype=float).copy()
        self.coeffs.setflags(write=False)
        self.tf = float(tf)

    @property
    def degree(self):
        return len(self.coeffs) - 1

    def __call__(self, t, k=0):
        t = np.asarray(t, dtype=float)
        slack = _DOMAIN_SLACK * max(1.0, self.tf)
        if np.any(t < -slack) or np.any(t > self.tf + slack):
            raise OutOfDomain(f"t outside [0, {self.tf}]")
        s = np.clip(t / self.tf, 0.0, 1.0)
        c = self.coeffs
        for _ in range(k):
            c = c[1:] * np.arange(1, len(c))
        if len(c) == 0:
            val = np.zeros_like(s)
        else:
            val = np.polynomial.polynomial.polyval(s, c)
        out = val / self.tf**k
        return float(out) if np.isscalar(t) or t.ndim == 0 else out

    def derivative(self):
        """First time derivative as a new PolyFunction on the same window."""
        c = self.coeffs[1:] * np.arange(1, len(self.coeffs)) / self.tf
        if len(c) == 0:
            c = np.zeros(1)
        return PolyFunction(c, self.tf)

    def to_json(self):
        return {"tf": self.tf, "coeffs": list(map(float, self.coeffs))}

    @classmethod
    def from_json(cls, data):
        return cls(np.asarray(data["coeffs"], dtype=float), data["tf"])

    def __repr__(self):
        return f"PolyFunction(degree={self.degree}, tf={self.tf})"


def build_poly(spec):
    """Minimal-degree polynomial satisfying all conditions of ``spec``.

    The linear system is assembled in s = t/t_f and solved by LU with
    partial pivoting; condition numbers above 1e12 are rejected.
    """
    n = spec.n_conditions
    rows = []
    rhs = []
    j = np.arange(n)
    for k, value in spec.left:
        if k >= n:
            raise SingularSystem(f"derivative order {k} exceeds polynomial degree")
        row = np.zeros(n)
        row[k] = _falling_factorial(k, k)
        rows.append(row)
        rhs.append(value * spec.tf**k)
    for k, value in spec.right:
        if k >= n:
            raise SingularSystem(f"derivative order {k} exceeds polynomial degree")
        rows.append(np.where(j >= k, _falling_factorial(j, k), 0.0))
        rhs.append(value * spec.tf**k)
    mat = np.asarray(rows)
    if np.linalg.cond(mat) > _COND_LIMIT:
        raise SingularSystem("boundary conditions are (nearly) linearly dependent")
    try:
        coeffs = np.linalg.solve(mat, np.asarray(rhs))
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc
    return PolyFunction(coeffs, spec.tf)


def _falling_factorial(j, k):
    """j!/(j-k)! elementwise, the k-th derivative factor of s**j at s = 1."""
    j = np.asarray(j, dtype=float)
    out = np.ones_like(j)
    for i in range(int(k)):
        out = out * (j - i)
    return out


def smoothstep_poly(tf, start, stop, smoothness=2):
    """Polynomial going from ``start`` to ``stop`` with flat edges.

    Derivatives of order 1..smoothness vanish at both ends; smoothness=2
    gives the familiar 10-15-6 quintic, smoothness=1 the cubic 3s^2 - 2s^3.
    """
    zeros = [(k, 0.0) for k in range(1, smoothness + 1)]
    spec = BoundarySpec(tf, left=((0, start), *zeros), right=((0, stop), *zeros))
    return build_poly(spec)


def constant_poly(tf, value):
    """Degree-zero polynomial, handy for frozen controls."""
    return PolyFunction([value], tf)
