"""Interface-curve parametrizations with analytic derivatives to third order.

All built-in interfaces are trigonometric polynomials in the parameter, so
every derivative needed by the tubular chart and the curvilinear Laplacian
is exact to roundoff.  User-defined curves are supplied as cosine/sine
coefficient tables of the same form.
"""

from __future__ import annotations

import numpy as np

from .errors import DegenerateParametrization

_SPEED_TOL = 1e-12


class InterfaceCurve:
    """A planar parametrized curve g : [xi_start, xi_end] -> R^2.

    Subclasses implement ``point``, ``velocity``, ``accel`` and ``jerk``
    (g and its first three derivatives), each vectorized over the parameter.

    Parameters
    ----------
    xi_start, xi_end : float
        Parameter interval.  For a closed (Jordan) curve the endpoints map
        to the same point and the parametrization extends periodically.
    periodic : bool
        Whether the curve is closed with period ``xi_end - xi_start``.
    """

    def __init__(self, xi_start: float, xi_end: float, periodic: bool):
        self.xi_start = float(xi_start)
        self.xi_end = float(xi_end)
        self.periodic = bool(periodic)
        self._max_curvature = None

    # -- derivatives, implemented by subclasses ---------------------------
    def point(self, xi):
        raise NotImplementedError

    def velocity(self, xi):
        raise NotImplementedError

    def accel(self, xi):
        raise NotImplementedError

    def jerk(self, xi):
        raise NotImplementedError

    # ----------------------------------------------------------------------
    @property
    def period(self) -> float:
        return self.xi_end - self.xi_start

    def speed(self, xi):
        return np.linalg.norm(self.velocity(xi), axis=-1)

    def curvature(self, xi):
        """Signed curvature det(g', g'') / ||g'||^3."""
        v = self.velocity(xi)
        a = self.accel(xi)
        s = np.linalg.norm(v, axis=-1)
        if np.any(s < _SPEED_TOL):
            raise DegenerateParametrization("||g'|| < 1e-12 at some parameter")
        return (v[..., 0] * a[..., 1] - v[..., 1] * a[..., 0]) / s**3

    @property
    def max_curvature(self) -> float:
        """Upper bound on |curvature|, sampled densely once and cached."""
        if self._max_curvature is None:
            xi = np.linspace(self.xi_start, self.xi_end, 8192, endpoint=False)
            self._max_curvature = float(np.max(np.abs(self.curvature(xi))))
        return self._max_curvature


class TrigCurve(InterfaceCurve):
    """Closed curve whose components are trigonometric polynomials.

    x(xi) = sum_k ax[k] cos(k xi) + bx[k] sin(k xi), same for y with ay/by.
    Period is 2*pi.
    """

    def __init__(self, ax, bx, ay, by):
        super().__init__(0.0, 2.0 * np.pi, periodic=True)
        n = max(len(ax), len(bx), len(ay), len(by))

        def pad(c):
            out = np.zeros(n)
            out[: len(c)] = c
            return out

        self.ax, self.bx = pad(ax), pad(bx)
        self.ay, self.by = pad(ay), pad(by)
        self._k = np.arange(n, dtype=float)

    def _eval(self, xi, order: int):
        xi = np.asarray(xi, dtype=float)
        th = np.multiply.outer(xi, self._k)
        cos, sin = np.cos(th), np.sin(th)
        kp = self._k**order
        # d/dxi rotates (cos, sin) -> (-k sin, k cos); apply `order` times.
        if order % 4 == 0:
            cc, ss = cos, sin
        elif order % 4 == 1:
            cc, ss = -sin, cos
        elif order % 4 == 2:
            cc, ss = -cos, -sin
        else:
            cc, ss = sin, -cos
        x = cc @ (kp * self.ax) + ss @ (kp * self.bx)
        y = cc @ (kp * self.ay) + ss @ (kp * self.by)
        return np.stack([x, y], axis=-1)

    def point(self, xi):
        return self._eval(xi, 0)

    def velocity(self, xi):
        return self._eval(xi, 1)

    def accel(self, xi):
        return self._eval(xi, 2)

    def jerk(self, xi):
        return self._eval(xi, 3)


class LineCurve(InterfaceCurve):
    """Straight interface g(xi) = origin + xi * direction (not closed)."""

    def __init__(self, origin, direction, xi_start: float = -10.0, xi_end: float = 10.0):
        super().__init__(xi_start, xi_end, periodic=False)
        self.origin = np.asarray(origin, dtype=float)
        self.direction = np.asarray(direction, dtype=float)
        if np.linalg.norm(self.direction) < _SPEED_TOL:
            raise DegenerateParametrization("zero direction vector")
        self._max_curvature = 0.0

    def _broadcast(self, xi, vec):
        xi = np.asarray(xi, dtype=float)
        return np.broadcast_to(vec, xi.shape + (2,)).copy()

    def point(self, xi):
        xi = np.asarray(xi, dtype=float)
        return self.origin + np.multiply.outer(xi, self.direction)

    def velocity(self, xi):
        return self._broadcast(xi, self.direction)

    def accel(self, xi):
        return self._broadcast(xi, np.zeros(2))

    def jerk(self, xi):
        return self._broadcast(xi, np.zeros(2))


def circle(radius: float, center=(0.0, 0.0)) -> TrigCurve:
    """Circle of given radius traversed counterclockwise."""
    cx, cy = center
    return TrigCurve(ax=[cx, radius], bx=[0.0, 0.0], ay=[cy, 0.0], by=[0.0, radius])


def ellipse(a: float, b: float, center=(0.0, 0.0)) -> TrigCurve:
    """Axis-aligned ellipse with semi-axes a (x) and b (y)."""
    cx, cy = center
    return TrigCurve(ax=[cx, a], bx=[0.0, 0.0], ay=[cy, 0.0], by=[0.0, b])


def flower(r0: float, amp: float, petals: int, center=(0.0, 0.0)) -> TrigCurve:
    """Polar-graph curve r(theta) = r0 + amp*cos(petals*theta).

    Expanded into a trigonometric polynomial via product-to-sum identities,
    keeping all derivatives analytic.
    """
    k = int(petals)
    cx, cy = center
    n = k + 2
    ax = np.zeros(n)
    by = np.zeros(n)
    ax[0], ax[1] = cx, r0
    by[1] = r0
    # (amp cos(k t)) cos t = amp/2 (cos((k+1)t) + cos((k-1)t))
    ax[k + 1] += amp / 2.0
    ax[abs(k - 1)] += amp / 2.0
    # (amp cos(k t)) sin t = amp/2 (sin((k+1)t) - sin((k-1)t))
    by[k + 1] += amp / 2.0
    by[abs(k - 1)] -= amp / 2.0
    ay = np.zeros(n)
    ay[0] = cy
    return TrigCurve(ax=ax, bx=np.zeros(n), ay=ay, by=by)


def curve_from_config(spec: dict) -> InterfaceCurve:
    """Build a curve from a config block {"kind": ..., parameters...}."""
    kind = spec["kind"]
    if kind == "circle":
        return circle(spec["radius"], tuple(spec.get("center", (0.0, 0.0))))
    if kind == "ellipse":
        return ellipse(spec["a"], spec["b"], tuple(spec.get("center", (0.0, 0.0))))
    if kind == "flower":
        return flower(spec["r0"], spec["amp"], spec["petals"],
                      tuple(spec.get("center", (0.0, 0.0))))
    if kind == "trig":
        return TrigCurve(spec["ax"], spec["bx"], spec["ay"], spec["by"])
    if kind == "line":
        return LineCurve(spec["origin"], spec["direction"],
                         spec.get("xi_start", -10.0), spec.get("xi_end", 10.0))
    raise ValueError(f"unknown interface kind {kind!r}")
