"""Local finite element spaces.

Plain elements carry the usual tensor-product Lagrange basis on
Gauss-Lobatto nodes.  Interface elements carry the immersed basis built in
tubular coordinates on the fictitious box [-h, h] x [xi0, xi1]: the direct
sum of the continuous constrained polynomials (X0, one per trace degree)
and the eta-vanishing monomials weighted by 1/beta per side (X1).  Both
families satisfy the value and flux matching across the interface exactly;
X0 additionally satisfies the operator moment conditions weakly.

All interface polynomials are stored in shifted/scaled coordinates
etabar = eta/h, xibar = (xi - xi_c)/h_xi for conditioning at small h.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import legval

from .errors import DimensionMismatch, SingularMass
from .frenet import FrenetChart
from .laplacian import FrenetLaplacian
from .mesh import ElementTag, MeshTags, RectMesh
from .quadrature import cut_cell_rules, gauss_rect, interface_line_rule


@dataclass
class LocalScaling:
    """Affine normalization of (eta, xi) onto the unit box of one element."""

    h_eta: float
    xi_c: float
    h_xi: float

    def xibar(self, xi):
        return (np.asarray(xi, dtype=float) - self.xi_c) / self.h_xi

    def etabar(self, eta):
        return np.asarray(eta, dtype=float) / self.h_eta


def monomials_x1(m: int):
    """(j, i) exponent pairs spanning the eta-vanishing block."""
    return [(j, i) for j in range(1, m + 1) for i in range(m + 1)]


def _legendre_rows(deg_max, xbar):
    rows = np.zeros((deg_max + 1, len(xbar)))
    for d in range(deg_max + 1):
        coef = np.zeros(d + 1)
        coef[d] = 1.0
        rows[d] = legval(xbar, coef)
    return rows


def _poly_line_series(C, scaling: LocalScaling, xbar, n_terms):
    """eta-series of p, p_xi, p_xixi on the interface line at given nodes.

    C is the (m+1, m+1) coefficient matrix over etabar^j xibar^i; returns
    three arrays shaped (n_terms, n_nodes).
    """
    m = C.shape[0] - 1
    nq = len(xbar)
    V = np.vander(xbar, m + 1, increasing=True).T       # V[i] = xibar^i
    P = np.zeros((n_terms, nq))
    P1 = np.zeros((n_terms, nq))
    P2 = np.zeros((n_terms, nq))
    i_idx = np.arange(m + 1)
    for l in range(min(n_terms, m + 1)):
        scale = scaling.h_eta ** (-l)
        P[l] = scale * (C[l] @ V)
        d1 = C[l] * i_idx
        P1[l] = scale / scaling.h_xi * (np.roll(d1, -1)[: m + 1] @ V) if m >= 1 else 0.0
        d2 = C[l] * i_idx * (i_idx - 1)
        P2[l] = scale / scaling.h_xi**2 * (np.roll(d2, -2)[: m + 1] @ V) if m >= 2 else 0.0
    return P, P1, P2


def _l_operator_series(C, scaling, jets, xbar, n_out):
    """eta-series of L(p) on the line: coefficients of eta^l, l < n_out."""
    A, B, Cc = jets
    P, P1, P2 = _poly_line_series(C, scaling, xbar, n_out + 2)
    out = np.zeros((n_out, P.shape[1]))
    for l in range(n_out):
        acc = (l + 1) * (l + 2) * P[l + 2]
        for k in range(l + 1):
            acc = acc + A[k] * (l - k + 1) * P[l - k + 1]
            acc = acc + B[k] * P2[l - k]
            acc = acc + Cc[k] * P1[l - k]
        out[l] = acc
    return out


def build_x0(chart: FrenetChart, interval, m: int, line_q: int | None = None):
    """Constrained continuous polynomials: nullspace of the trace conditions.

    Rows: the m+1 coefficients of p_eta(0, .) plus, for each eta-derivative
    order j <= m-2, the moments of L(p)(0, .) against Legendre tests up to
    degree m.  Returns (vectors (m+1, m+1, m+1), scaling).

    Raises DimensionMismatch if the nullspace dimension is not m+1.
    """
    xi0, xi1 = interval
    scaling = LocalScaling(h_eta=chart.h, xi_c=0.5 * (xi0 + xi1), h_xi=0.5 * (xi1 - xi0))
    nb = (m + 1) ** 2
    rows = []
    for i in range(m + 1):
        r = np.zeros(nb)
        r[1 * (m + 1) + i] = 1.0
        rows.append(r)
    if m >= 2:
        q = line_q if line_q is not None else m + 3
        rule = interface_line_rule(xi0, xi1, q)
        xbar = scaling.xibar(rule.points)
        jets = FrenetLaplacian(chart).coefficient_jets(rule.points, m - 2)
        tests = _legendre_rows(m, xbar)
        series = np.zeros((nb, m - 1, len(xbar)))
        for j in range(m + 1):
            for i in range(m + 1):
                C = np.zeros((m + 1, m + 1))
                C[j, i] = 1.0
                series[j * (m + 1) + i] = _l_operator_series(C, scaling, jets, xbar, m - 1)
        for jj in range(m - 1):
            for d in range(m + 1):
                rows.append(series[:, jj, :] @ (rule.weights * tests[d]))
    M = np.vstack(rows)
    u, s, vt = np.linalg.svd(M)
    rank = int(np.sum(s > 1e-10 * s[0]))
    null_dim = nb - rank
    if null_dim != m + 1:
        raise DimensionMismatch(
            f"X0 nullspace dimension {null_dim}, expected {m + 1}; "
            "raise the line quadrature order or check the chart")
    vecs = vt[rank:]
    return vecs.reshape(m + 1, m + 1, m + 1), scaling


class IfeBasis:
    """Immersed basis of one interface element: (m+1)^2 piecewise functions.

    Each function is a pair of coefficient matrices over (etabar, xibar),
    one per side of the interface; X0 members coincide on both sides, X1
    members are the same monomial divided by the side's beta.
    """

    kind = "interface"

    def __init__(self, chart: FrenetChart, tag: ElementTag, m: int,
                 beta_minus: float, beta_plus: float, line_q: int | None = None):
        self.chart = chart
        self.tag = tag
        self.m = m
        self.beta = {-1: float(beta_minus), 1: float(beta_plus)}
        x0, scaling = build_x0(chart, tag.interval, m, line_q)
        self.scaling = scaling
        self.interval = tag.interval
        self.n_basis = (m + 1) ** 2
        c_plus = []
        c_minus = []
        self.origins = []
        for k in range(m + 1):
            c_plus.append(x0[k])
            c_minus.append(x0[k])
            self.origins.append("x0")
        for j, i in monomials_x1(m):
            C = np.zeros((m + 1, m + 1))
            C[j, i] = 1.0
            c_plus.append(C / beta_plus)
            c_minus.append(C / beta_minus)
            self.origins.append("x1")
        self.coef = {1: np.array(c_plus), -1: np.array(c_minus)}

    # -- evaluation ------------------------------------------------------------
    def _powers(self, ebar, xbar):
        m = self.m
        Ve = np.vander(ebar, m + 1, increasing=True)
        Vx = np.vander(xbar, m + 1, increasing=True)
        j = np.arange(m + 1)
        dVe = np.zeros_like(Ve)
        dVe[:, 1:] = Ve[:, :-1] * j[1:]
        dVx = np.zeros_like(Vx)
        dVx[:, 1:] = Vx[:, :-1] * j[1:]
        return Ve, Vx, dVe, dVx

    def evaluate_ref(self, eta, xi, side):
        """Values and (d/deta, d/dxi) gradients in tubular coordinates."""
        eta = np.atleast_1d(np.asarray(eta, dtype=float))
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        side = np.broadcast_to(np.asarray(side), eta.shape)
        Ve, Vx, dVe, dVx = self._powers(self.scaling.etabar(eta), self.scaling.xibar(xi))
        vals = np.empty((self.n_basis, len(eta)))
        g_eta = np.empty_like(vals)
        g_xi = np.empty_like(vals)
        for s in (-1, 1):
            mask = side == s
            if not np.any(mask):
                continue
            C = self.coef[s]
            vals[:, mask] = np.einsum("bji,pj,pi->bp", C, Ve[mask], Vx[mask])
            g_eta[:, mask] = np.einsum("bji,pj,pi->bp", C, dVe[mask], Vx[mask]) \
                / self.scaling.h_eta
            g_xi[:, mask] = np.einsum("bji,pj,pi->bp", C, Ve[mask], dVx[mask]) \
                / self.scaling.h_xi
        return vals, g_eta, g_xi

    def evaluate(self, pts, side=None):
        """Physical values and gradients at points of the element.

        `side` may be +-1 (scalar or array) to force the branch, e.g. on
        points lying exactly on the interface; by default the sign of eta
        decides.
        """
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        anchor = 0.5 * (self.interval[0] + self.interval[1])
        eta, xi = self.chart.inverse(pts, xi_anchor=anchor)
        if side is None:
            side = np.where(eta >= 0.0, 1, -1)
        else:
            side = np.broadcast_to(np.asarray(side), eta.shape)
        vals, g_eta, g_xi = self.evaluate_ref(eta, xi, side)
        J = self.chart.jacobian(eta, xi)
        det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
        gx = (J[:, 1, 1] * g_eta - J[:, 1, 0] * g_xi) / det
        gy = (-J[:, 0, 1] * g_eta + J[:, 0, 0] * g_xi) / det
        return vals, np.stack([gx, gy], axis=-1)

    # -- diagnostics -------------------------------------------------------------
    def gram_fictitious(self):
        """Exact L2 Gram over the fictitious box (both sides)."""
        m = self.m
        a = np.arange(m + 1)
        apb = a[:, None] + a[None, :]
        m_neg = ((-1.0) ** apb) / (apb + 1.0)
        m_pos = 1.0 / (apb + 1.0)
        m_xi = np.where(apb % 2 == 0, 2.0 / (apb + 1.0), 0.0)
        scale = self.scaling.h_eta * self.scaling.h_xi
        g = np.einsum("fab,gcd,ac,bd->fg", self.coef[-1], self.coef[-1], m_neg, m_xi)
        g = g + np.einsum("fab,gcd,ac,bd->fg", self.coef[1], self.coef[1], m_pos, m_xi)
        return scale * g

    def interface_jumps(self, xi):
        """Pointwise value and flux mismatch of every basis function on the
        interface: (jump values, jump of beta * d_eta) at parameters xi."""
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        zeros = np.zeros_like(xi)
        vp, gp, _ = self.evaluate_ref(zeros, xi, np.ones_like(xi, dtype=int))
        vm, gm, _ = self.evaluate_ref(zeros, xi, -np.ones_like(xi, dtype=int))
        return vp - vm, self.beta[1] * gp - self.beta[-1] * gm

    def weak_condition_residuals(self, line_q: int | None = None):
        """Moment residuals of the operator jump conditions, all orders j <= m-2.

        Uses its own (refinable) quadrature so it can cross-check the
        constraint assembly.
        """
        m = self.m
        if m < 2:
            return np.zeros((self.n_basis, 0))
        xi0, xi1 = self.interval
        q = line_q if line_q is not None else m + 6
        rule = interface_line_rule(xi0, xi1, q)
        xbar = self.scaling.xibar(rule.points)
        jets = FrenetLaplacian(self.chart).coefficient_jets(rule.points, m - 2)
        tests = _legendre_rows(m, xbar)
        out = np.zeros((self.n_basis, (m - 1) * (m + 1)))
        for bfun in range(self.n_basis):
            sp = _l_operator_series(self.coef[1][bfun], self.scaling, jets, xbar, m - 1)
            sm = _l_operator_series(self.coef[-1][bfun], self.scaling, jets, xbar, m - 1)
            jump = self.beta[1] * sp - self.beta[-1] * sm
            k = 0
            for jj in range(m - 1):
                for d in range(m + 1):
                    out[bfun, k] = jump[jj] @ (rule.weights * tests[d])
                    k += 1
        return out


def _lobatto_nodes(m: int):
    if m == 1:
        return np.array([-1.0, 1.0])
    if m == 2:
        return np.array([-1.0, 0.0, 1.0])
    if m == 3:
        s = 1.0 / np.sqrt(5.0)
        return np.array([-1.0, -s, s, 1.0])
    raise ValueError("degree must be 1, 2 or 3")


def _lagrange_1d(nodes, x):
    """Values and derivatives of the Lagrange basis at points x."""
    n = len(nodes)
    vals = np.ones((n, len(x)))
    ders = np.zeros((n, len(x)))
    for a in range(n):
        for b in range(n):
            if b == a:
                continue
            vals[a] *= (x - nodes[b]) / (nodes[a] - nodes[b])
        for c in range(n):
            if c == a:
                continue
            term = np.ones_like(x) / (nodes[a] - nodes[c])
            for b in range(n):
                if b in (a, c):
                    continue
                term *= (x - nodes[b]) / (nodes[a] - nodes[b])
            ders[a] += term
    return vals, ders


class TensorBasis:
    """Q^m Lagrange basis on Gauss-Lobatto nodes of one uncut element."""

    kind = "plain"

    def __init__(self, box, m: int, side: int):
        self.box = box
        self.m = m
        self.side = int(side)
        self.n_basis = (m + 1) ** 2
        self.nodes = _lobatto_nodes(m)

    def evaluate(self, pts, side=None):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        xl, yl, xh, yh = self.box
        xr = 2.0 * (pts[:, 0] - xl) / (xh - xl) - 1.0
        yr = 2.0 * (pts[:, 1] - yl) / (yh - yl) - 1.0
        vx, dx_ = _lagrange_1d(self.nodes, xr)
        vy, dy_ = _lagrange_1d(self.nodes, yr)
        vals = (vx[:, None, :] * vy[None, :, :]).reshape(self.n_basis, -1)
        gx = (dx_[:, None, :] * vy[None, :, :]).reshape(self.n_basis, -1) * (2.0 / (xh - xl))
        gy = (vx[:, None, :] * dy_[None, :, :]).reshape(self.n_basis, -1) * (2.0 / (yh - yl))
        return vals, np.stack([gx, gy], axis=-1)


@dataclass
class DofLayout:
    """Contiguous per-element blocks of (m+1)^2 coefficients."""

    n_elements: int
    n_local: int

    @property
    def total(self) -> int:
        return self.n_elements * self.n_local

    def dofs(self, e: int):
        return np.arange(e * self.n_local, (e + 1) * self.n_local)


class SpaceSet:
    """All local bases of a classified mesh plus the coefficient layout."""

    def __init__(self, mesh: RectMesh, tags: MeshTags, chart: FrenetChart,
                 m: int, beta_minus: float, beta_plus: float,
                 line_q: int | None = None):
        self.mesh = mesh
        self.tags = tags
        self.chart = chart
        self.m = m
        self.beta_minus = float(beta_minus)
        self.beta_plus = float(beta_plus)
        self.bases = []
        for e in range(mesh.n_elements):
            t = tags.tags[e]
            if t.kind == "interface":
                self.bases.append(IfeBasis(chart, t, m, beta_minus, beta_plus, line_q))
            else:
                self.bases.append(TensorBasis(mesh.elem_box(e), m, t.side))
        self.layout = DofLayout(mesh.n_elements, (m + 1) ** 2)

    def beta_of(self, side) -> float:
        return np.where(np.asarray(side) > 0, self.beta_plus, self.beta_minus)

    def element_rules(self, e: int, q: int):
        """[(rule, side)] covering element e with the right branch labels."""
        t = self.tags.tags[e]
        if t.kind == "interface":
            rules = cut_cell_rules(self.mesh, e, t, self.chart, q)
            return [(rules[1], 1), (rules[-1], -1)]
        return [(gauss_rect(self.mesh.elem_box(e), q), t.side)]


def build_spaces(mesh, tags, chart, m, beta_minus, beta_plus, line_q=None) -> SpaceSet:
    return SpaceSet(mesh, tags, chart, m, beta_minus, beta_plus, line_q)


def space_diagnostics(spaces: SpaceSet, n_samples: int = 24):
    """Per-interface-element conditioning and conformity residuals.

    One row per interface element: normalized Gram condition number and
    smallest singular value, plus the maxima of the value/flux jumps on the
    interface and of the weak moment residuals.
    """
    rows = []
    for e in spaces.tags.interface_elements:
        b = spaces.bases[e]
        g = b.gram_fictitious()
        d = np.sqrt(np.diag(g))
        sv = np.linalg.svd(g / np.outer(d, d), compute_uv=False)
        xi0, xi1 = b.interval
        xs = np.linspace(xi0, xi1, n_samples)
        jv, jf = b.interface_jumps(xs)
        weak = b.weak_condition_residuals()
        rows.append({
            "element": e,
            "gram_cond": float(sv[0] / sv[-1]),
            "gram_min_sv": float(sv[-1]),
            "max_value_jump": float(np.max(np.abs(jv))),
            "max_flux_jump": float(np.max(np.abs(jf))),
            "max_weak_residual": float(np.max(np.abs(weak))) if weak.size else 0.0,
        })
    return rows


def project_l2(u, spaces: SpaceSet, q: int | None = None):
    """Per-element L2 projection; u(points, side) -> values.

    Block-diagonal mass solve with cut-aware quadrature on interface
    elements.  Raises SingularMass if a local mass matrix is unusable.
    """
    q = q if q is not None else spaces.m + 2
    out = np.zeros(spaces.layout.total)
    for e in range(spaces.mesh.n_elements):
        basis = spaces.bases[e]
        n = basis.n_basis
        M = np.zeros((n, n))
        rhs = np.zeros(n)
        for rule, side in spaces.element_rules(e, q):
            vals, _ = basis.evaluate(rule.points, side=side)
            M += (vals * rule.weights) @ vals.T
            rhs += vals @ (rule.weights * u(rule.points, side))
        if np.linalg.cond(M) > 1e12:
            raise SingularMass(f"element {e}: mass condition number > 1e12")
        out[spaces.layout.dofs(e)] = np.linalg.solve(M, rhs)
    return out
