"""Tubular (Frenet) coordinates around an interface curve.

The chart maps normal-offset coordinates (eta, xi) to physical points via
P(eta, xi) = g(xi) + eta*n(xi) and inverts the map with a damped Newton
iteration seeded from a dense polyline of the curve.  It also produces the
per-element parameter intervals of the fictitious boxes and the affine
chord charts used to probe how far P is from its linearization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .curves import InterfaceCurve
from .errors import (
    DegenerateChord,
    DegenerateParametrization,
    NewtonDivergence,
    OutsideValidityStrip,
)

# Rotation taking the unit tangent to the unit normal (tau rotated by -90 deg),
# so the normal points from the minus side toward the plus side.
ROT = np.array([[0.0, 1.0], [-1.0, 0.0]])


@dataclass
class FrenetFrame:
    """Unit tangent, unit normal, signed curvature and speed at one parameter."""

    tau: np.ndarray
    n: np.ndarray
    kappa: float
    speed: float


def frenet_apparatus(curve: InterfaceCurve, xi) -> FrenetFrame:
    """Evaluate the Frenet frame of `curve` at parameter(s) `xi`.

    Returns tau = g'/||g'||, n = ROT tau, signed curvature
    kappa = det(g', g'')/||g'||^3 and speed ||g'||.  Vectorized: array
    input yields arrays with the trailing component axis.
    """
    xi = np.asarray(xi, dtype=float)
    v = curve.velocity(xi)
    a = curve.accel(xi)
    s = np.linalg.norm(v, axis=-1)
    if np.any(s < 1e-12):
        raise DegenerateParametrization("||g'(xi)|| < 1e-12")
    tau = v / s[..., None]
    n = tau @ ROT.T
    kappa = (v[..., 0] * a[..., 1] - v[..., 1] * a[..., 0]) / s**3
    if xi.ndim == 0:
        return FrenetFrame(tau=tau, n=n, kappa=float(kappa), speed=float(s))
    return FrenetFrame(tau=tau, n=n, kappa=kappa, speed=s)


def unwrap_near(xi, anchor: float, period: float):
    """Shift xi by multiples of `period` into (anchor-period/2, anchor+period/2]."""
    return xi - period * np.round((xi - anchor) / period)


class FrenetChart:
    """Invertible tubular chart of half-width `h` around an interface curve.

    Parameters
    ----------
    curve : InterfaceCurve
    h : float
        Strip half-width; normally the mesh element diagonal.  Construction
        requires h * max_curvature < 1 so the Jacobian determinant
        ||g'||(1 + eta*kappa) stays positive on the strip |eta| <= h.
    newton_tol : float
        Absolute tolerance on ||P(eta, xi) - x|| for the inverse map.
    max_iter : int
        Newton iteration cap before reporting divergence.
    """

    def __init__(self, curve: InterfaceCurve, h: float,
                 newton_tol: float = 1e-13, max_iter: int = 40):
        if h <= 0:
            raise ValueError("strip half-width h must be positive")
        kmax = curve.max_curvature
        if h * kmax >= 1.0:
            raise OutsideValidityStrip(
                f"h*max_curvature = {h * kmax:.3f} >= 1: strip not invertible")
        self.curve = curve
        self.h = float(h)
        self.newton_tol = float(newton_tol)
        self.max_iter = int(max_iter)
        self._seed_tree = None
        self._seed_xi = None
        self._seed_pts = None
        self._seed_normals = None

    # -- forward map -------------------------------------------------------
    def map(self, eta, xi):
        """P(eta, xi) = g(xi) + eta n(xi).  Requires |eta|*max_curvature < 1."""
        eta = np.asarray(eta, dtype=float)
        if np.any(np.abs(eta) * self.curve.max_curvature >= 1.0):
            raise OutsideValidityStrip("|eta|*max_curvature >= 1")
        fr = frenet_apparatus(self.curve, xi)
        return self.curve.point(np.asarray(xi, dtype=float)) + eta[..., None] * fr.n

    def jacobian(self, eta, xi):
        """Jacobian of P: columns (n, (1 + eta*kappa) g').  Shape (..., 2, 2)."""
        eta = np.asarray(eta, dtype=float)
        xi = np.asarray(xi, dtype=float)
        fr = frenet_apparatus(self.curve, xi)
        v = self.curve.velocity(xi)
        col_xi = (1.0 + eta * np.asarray(fr.kappa))[..., None] * v
        return np.stack([fr.n, col_xi], axis=-1)

    def jacobian_det(self, eta, xi):
        """det DP = ||g'(xi)|| (1 + eta*kappa(xi))."""
        fr = frenet_apparatus(self.curve, np.asarray(xi, dtype=float))
        return np.asarray(fr.speed) * (1.0 + np.asarray(eta, dtype=float) * np.asarray(fr.kappa))

    # -- polyline seed data --------------------------------------------------
    def _seeds(self):
        if self._seed_tree is None:
            c = self.curve
            m = 4096
            xi = np.linspace(c.xi_start, c.xi_end, m, endpoint=not c.periodic)
            pts = c.point(xi)
            fr = frenet_apparatus(c, xi)
            self._seed_xi = xi
            self._seed_pts = pts
            self._seed_normals = fr.n
            self._seed_tree = cKDTree(pts)
        return self._seed_tree, self._seed_xi, self._seed_pts, self._seed_normals

    def signed_distance_estimate(self, points):
        """Polyline-based signed normal offset; sign-exact near the curve.

        Well defined everywhere (including caustics where the exact inverse
        is singular), which is what element classification needs.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        tree, xi, curve_pts, normals = self._seeds()
        _, idx = tree.query(pts)
        d = pts - curve_pts[idx]
        eta = np.einsum("ij,ij->i", d, normals[idx])
        return eta if np.asarray(points).ndim > 1 else float(eta[0])

    def nearest_parameter_estimate(self, points):
        """Chord-projection foot on the seed polyline (Newton initial guess)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        tree, xi, curve_pts, _ = self._seeds()
        _, idx = tree.query(pts)
        nseed = len(xi)
        c = self.curve
        if c.periodic:
            nxt = (idx + 1) % nseed
            dxi = c.period / nseed
        else:
            nxt = np.minimum(idx + 1, nseed - 1)
            dxi = xi[1] - xi[0]
        a = curve_pts[idx]
        b = curve_pts[nxt]
        ab = b - a
        denom = np.einsum("ij,ij->i", ab, ab)
        denom[denom == 0.0] = 1.0
        t = np.clip(np.einsum("ij,ij->i", pts - a, ab) / denom, 0.0, 1.0)
        return xi[idx] + t * dxi

    # -- inverse map ---------------------------------------------------------
    def inverse(self, points, xi_anchor: float | None = None):
        """Invert P at one or many physical points.

        Returns (eta, xi) with ||P(eta, xi) - point|| <= newton_tol.  For a
        periodic curve the parameter is unwrapped near `xi_anchor` when given,
        otherwise reduced to the principal interval.

        Raises
        ------
        NewtonDivergence
            If any point fails to converge within max_iter iterations.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        single = np.asarray(points).ndim == 1
        c = self.curve

        xi = self.nearest_parameter_estimate(pts)
        fr = frenet_apparatus(c, xi)
        eta = np.einsum("ij,ij->i", pts - c.point(xi), np.atleast_2d(fr.n))

        active = np.arange(len(pts))
        for _ in range(self.max_iter):
            g = c.point(xi[active])
            fr = frenet_apparatus(c, xi[active])
            n = np.atleast_2d(fr.n)
            res = g + eta[active, None] * n - pts[active]
            rnorm = np.linalg.norm(res, axis=1)
            done = rnorm <= self.newton_tol
            if np.any(done):
                active = active[~done]
                if len(active) == 0:
                    break
                g, fr = c.point(xi[active]), frenet_apparatus(c, xi[active])
                n = np.atleast_2d(fr.n)
                res = g + eta[active, None] * n - pts[active]
                rnorm = np.linalg.norm(res, axis=1)
            v = np.atleast_2d(c.velocity(xi[active]))
            fac = 1.0 + eta[active] * np.asarray(fr.kappa)
            # solve [n | fac*g'] d = -res per point (2x2 closed form)
            a11, a21 = n[:, 0], n[:, 1]
            a12, a22 = fac * v[:, 0], fac * v[:, 1]
            det = a11 * a22 - a12 * a21
            det[np.abs(det) < 1e-300] = 1e-300
            d_eta = (-res[:, 0] * a22 + res[:, 1] * a12) / det
            d_xi = (res[:, 0] * a21 - res[:, 1] * a11) / det
            # damped update: backtrack while the residual grows
            step = np.ones(len(active))
            for _bt in range(30):
                eta_try = eta[active] + step * d_eta
                xi_try = xi[active] + step * d_xi
                res_try = (c.point(xi_try)
                           + eta_try[:, None] * np.atleast_2d(frenet_apparatus(c, xi_try).n)
                           - pts[active])
                worse = np.linalg.norm(res_try, axis=1) > rnorm
                if not np.any(worse):
                    break
                step[worse] *= 0.5
            eta[active] += step * d_eta
            xi[active] += step * d_xi
        else:
            res = (c.point(xi) + eta[:, None]
                   * np.atleast_2d(frenet_apparatus(c, xi).n) - pts)
            bad = np.linalg.norm(res, axis=1) > self.newton_tol
            if np.any(bad):
                raise NewtonDivergence(
                    f"{int(bad.sum())} point(s) failed to invert; "
                    "outside the tubular strip or mesh too coarse")

        if c.periodic:
            anchor = c.xi_start + 0.5 * c.period if xi_anchor is None else xi_anchor
            xi = unwrap_near(xi, anchor, c.period)
            if xi_anchor is None:
                xi = np.where(xi < c.xi_start, xi + c.period, xi)
        if single:
            return float(eta[0]), float(xi[0])
        return eta, xi

    # -- fictitious interval ---------------------------------------------------
    def fictitious_interval(self, corners, samples_per_edge: int = 8):
        """Parameter interval [xi0, xi1] of the fictitious box containing an element.

        `corners` is the (4, 2) array of element corners in boundary order.
        The xi-range of the inverse map is sampled on an ordered loop around
        the boundary (corners plus edge samples) and each extremum gets one
        parabolic refinement along the boundary, so the element stays inside
        P([-h, h] x [xi0, xi1]).
        """
        corners = np.asarray(corners, dtype=float)
        ts = np.linspace(0.0, 1.0, samples_per_edge + 2)[1:-1]
        loop = []
        for k in range(4):
            a, b = corners[k], corners[(k + 1) % 4]
            loop.append(a)
            loop.extend(a + t * (b - a) for t in ts)
        loop = np.asarray(loop)
        anchor = None
        if self.curve.periodic:
            _, anchor = self.inverse(corners[0])
        _, xi = self.inverse(loop, xi_anchor=anchor)

        lo = self._refine_extremum(loop, xi, int(np.argmin(xi)), sign=-1.0, anchor=anchor)
        hi = self._refine_extremum(loop, xi, int(np.argmax(xi)), sign=+1.0, anchor=anchor)
        pad = 1e-10 * max(hi - lo, 1e-30)
        return lo - pad, hi + pad

    def _refine_extremum(self, loop, xi, i, sign, anchor):
        """Parabolic correction along the boundary loop at sample i."""
        n = len(loop)
        prv, nxt = (i - 1) % n, (i + 1) % n
        y0, y1, y2 = xi[prv], xi[i], xi[nxt]
        a = 0.5 * (y0 + y2) - y1
        b = 0.5 * (y2 - y0)
        best = y1
        if abs(a) > 1e-300:
            t_v = float(np.clip(-b / (2.0 * a), -1.0, 1.0))
            if t_v >= 0.0:
                p = loop[i] + t_v * (loop[nxt] - loop[i])
            else:
                p = loop[i] - t_v * (loop[prv] - loop[i])
            try:
                _, xv = self.inverse(p, xi_anchor=anchor)
                best = max(best, xv) if sign > 0 else min(best, xv)
            except NewtonDivergence:
                pass
        return best

    def chord_chart(self, xi0: float, xi1: float) -> "ChordChart":
        """Affine chart through g(xi0), g(xi1); see ChordChart."""
        return ChordChart(self, xi0, xi1)


class ChordChart:
    """Affine stand-in for the Frenet chart on one fictitious interval.

    Interpolates the curve linearly between g(xi0) and g(xi1) and carries
    the exact closed-form inverse of the resulting affine map.  The
    transition map T = chord_inverse o P measures how far the true chart
    is from this linearization.
    """

    def __init__(self, chart: FrenetChart, xi0: float, xi1: float):
        if not xi1 > xi0:
            raise ValueError("need xi1 > xi0")
        self.chart = chart
        self.xi0, self.xi1 = float(xi0), float(xi1)
        curve = chart.curve
        g0 = curve.point(np.asarray(xi0, dtype=float))
        g1 = curve.point(np.asarray(xi1, dtype=float))
        if np.linalg.norm(g1 - g0) < 1e-12:
            raise DegenerateChord("||g(xi1) - g(xi0)|| < 1e-12")
        d = (g1 - g0) / (xi1 - xi0)
        tau = d / np.linalg.norm(d)
        n = ROT @ tau
        self.tau, self.n = tau, n
        # P_chord(eta, xi) = A (eta, xi)^T + b
        self.A = np.column_stack([n, d])
        self.b = g0 - xi0 * d
        self.Ainv = np.linalg.inv(self.A)

    def g(self, xi):
        xi = np.asarray(xi, dtype=float)
        return self.b + np.multiply.outer(xi, self.A[:, 1])

    def map(self, eta, xi):
        coords = np.stack([np.asarray(eta, dtype=float),
                           np.asarray(xi, dtype=float)], axis=-1)
        return coords @ self.A.T + self.b

    def inverse(self, points):
        pts = np.asarray(points, dtype=float)
        return (pts - self.b) @ self.Ainv.T

    def transition(self, eta, xi):
        """T(eta, xi) = chord_inverse(P(eta, xi)); identity for straight interfaces."""
        return self.inverse(self.chart.map(eta, xi))

    def transition_jacobian(self, eta, xi):
        """DT = A^{-1} DP, shape (..., 2, 2)."""
        J = self.chart.jacobian(eta, xi)
        return np.einsum("ab,...bc->...ac", self.Ainv, J)
