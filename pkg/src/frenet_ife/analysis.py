"""Manufactured benchmarks, error norms, convergence studies and the
geometric/stability probes backing the method's guarantees."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .assembly import assemble, auto_sigma0, edge_segments, solve, trace_constant
from .curves import InterfaceCurve, circle
from .frenet import FrenetChart, frenet_apparatus
from .ife_space import SpaceSet, build_spaces, project_l2
from .mesh import build_mesh, classify_elements


@dataclass
class ManufacturedCase:
    """Exact piecewise solution with analytic gradients and source terms.

    All callables take (points (n, 2), side) with side +-1 scalar or array
    and return per-point values; `grad` returns (n, 2).
    """

    curve: InterfaceCurve
    beta_minus: float
    beta_plus: float
    u: callable
    grad: callable
    f: callable
    description: str = ""

    def dirichlet(self, pts, side):
        return self.u(pts, side)

    def beta(self, side):
        return np.where(np.asarray(side) > 0, self.beta_plus, self.beta_minus)


def manufactured_circle(r0: float, beta_minus: float, beta_plus: float,
                        p: int = 4) -> ManufacturedCase:
    """Radial power solution across a circular interface.

    u = r^p / beta inside and outside (outside shifted to stay continuous),
    so the flux and every radial derivative of beta*Laplacian match across
    the interface; the source f = -p^2 r^(p-2) is globally smooth.
    """
    if p < 4 or p % 2:
        raise ValueError("need even p >= 4 for the smoothness the scheme assumes")
    jump_shift = r0**p * (1.0 / beta_minus - 1.0 / beta_plus)

    def u(pts, side):
        pts = np.atleast_2d(pts)
        r2 = pts[:, 0] ** 2 + pts[:, 1] ** 2
        rp = r2 ** (p / 2)
        side = np.broadcast_to(np.asarray(side), rp.shape)
        return np.where(side > 0, rp / beta_plus + jump_shift, rp / beta_minus)

    def grad(pts, side):
        pts = np.atleast_2d(pts)
        r2 = pts[:, 0] ** 2 + pts[:, 1] ** 2
        fac = p * r2 ** (p / 2 - 1)
        side = np.broadcast_to(np.asarray(side), fac.shape)
        beta = np.where(side > 0, beta_plus, beta_minus)
        return (fac / beta)[:, None] * pts

    def f(pts, side):
        pts = np.atleast_2d(pts)
        r2 = pts[:, 0] ** 2 + pts[:, 1] ** 2
        return -(p**2) * r2 ** (p / 2 - 1)

    return ManufacturedCase(curve=circle(r0), beta_minus=beta_minus,
                            beta_plus=beta_plus, u=u, grad=grad, f=f,
                            description=f"circle r0={r0} p={p}")


def case_jump_residuals(case: ManufacturedCase, chart: FrenetChart, n_pts: int = 100):
    """Value/flux mismatch of the exact solution across the interface."""
    xi = np.linspace(chart.curve.xi_start, chart.curve.xi_end, n_pts, endpoint=False)
    pts = chart.curve.point(xi)
    n = frenet_apparatus(chart.curve, xi).n
    ju = case.u(pts, 1) - case.u(pts, -1)
    flux_p = case.beta_plus * np.einsum("pk,pk->p", case.grad(pts, 1), n)
    flux_m = case.beta_minus * np.einsum("pk,pk->p", case.grad(pts, -1), n)
    return ju, flux_p - flux_m


# ----------------------------------------------------------------------------
# error norms


def _uh_eval(spaces, coef, e, pts, side):
    vals, grads = spaces.bases[e].evaluate(pts, side=side)
    c = coef[spaces.layout.dofs(e)]
    return c @ vals, np.einsum("b,bpk->pk", c, grads)


def error_norms(coef, case: ManufacturedCase, spaces: SpaceSet,
                sigma0: float, q_vol: int | None = None,
                q_edge: int | None = None) -> dict:
    """L2, broken and energy norms of u - u_h with cut-aware quadrature.

    The flux-average terms use the exact gradients of the case on the
    exact-solution side of the error.
    """
    mesh = spaces.mesh
    m = spaces.m
    q_vol = q_vol if q_vol is not None else m + 2
    q_edge = q_edge if q_edge is not None else m + 3
    gamma = spaces.beta_plus**2 / spaces.beta_minus
    pen = sigma0 * gamma / mesh.h

    l2_sq = 0.0
    grad_sq = 0.0
    for e in range(mesh.n_elements):
        for rule, side in spaces.element_rules(e, q_vol):
            beta = float(spaces.beta_of(side))
            uh, guh = _uh_eval(spaces, coef, e, rule.points, side)
            du = case.u(rule.points, side) - uh
            dg = case.grad(rule.points, side) - guh
            l2_sq += rule.weights @ du**2
            grad_sq += beta * rule.weights @ np.einsum("pk,pk->p", dg, dg)

    jump_sq = 0.0
    flux_sq = 0.0
    for k in range(mesh.n_edges):
        n_e = mesh.edge_normal[k]
        e1, e2 = mesh.edge_elems[k]
        interior = e2 >= 0
        for pts, w, side in edge_segments(spaces, k, q_edge):
            beta = float(spaces.beta_of(side))
            u1, g1 = _uh_eval(spaces, coef, e1, pts, side)
            err1 = case.u(pts, side) - u1
            flux1 = beta * np.einsum("pk,k->p", case.grad(pts, side) - g1, n_e)
            if interior:
                u2, g2 = _uh_eval(spaces, coef, e2, pts, side)
                err2 = case.u(pts, side) - u2
                flux2 = beta * np.einsum("pk,k->p", case.grad(pts, side) - g2, n_e)
                jump_sq += w @ (err1 - err2) ** 2
                flux_sq += w @ (0.5 * (flux1 + flux2)) ** 2
            else:
                jump_sq += w @ err1**2
                flux_sq += w @ flux1**2

    norm_h_sq = grad_sq + pen * jump_sq
    energy_sq = norm_h_sq + flux_sq / pen
    return {"l2": float(np.sqrt(l2_sq)),
            "norm_h": float(np.sqrt(norm_h_sq)),
            "energy": float(np.sqrt(energy_sq))}


# ----------------------------------------------------------------------------
# studies


@dataclass
class ErrorReport:
    """Per-level errors of a refinement chain plus pairwise log2 rates."""

    ns: list = field(default_factory=list)
    hs: list = field(default_factory=list)
    n_dofs: list = field(default_factory=list)
    errors: list = field(default_factory=list)   # dicts: l2 / norm_h / energy
    sigma0: float = 0.0
    trace_constant: float = 0.0

    def rates(self, key: str):
        es = [row[key] for row in self.errors]
        return [float(np.log2(es[i] / es[i + 1])) for i in range(len(es) - 1)]

    def rows(self):
        out = []
        for i, n in enumerate(self.ns):
            row = {"n": n, "h": self.hs[i], "dofs": self.n_dofs[i], **self.errors[i]}
            for key in ("l2", "norm_h", "energy"):
                rate = self.rates(key)[i - 1] if i > 0 else float("nan")
                row[f"rate_{key}"] = rate
            out.append(row)
        return out


def setup_level(case: ManufacturedCase, box, n: int, m: int,
                line_q: int | None = None):
    mesh = build_mesh(box, n)
    chart = FrenetChart(case.curve, h=mesh.h)
    tags = classify_elements(mesh, chart)
    return build_spaces(mesh, tags, chart, m, case.beta_minus, case.beta_plus,
                        line_q)


def convergence_study(case: ManufacturedCase, m: int, ns, box=(-1, 1, -1, 1),
                      sigma0="auto", q_vol=None, q_edge=None,
                      line_q=None) -> ErrorReport:
    """Solve on a 2:1 refinement chain and tabulate errors and rates.

    An "auto" penalty is probed once on the coarsest level and reused, so
    sigma0 stays mesh-independent across the chain.
    """
    report = ErrorReport()
    sig = sigma0
    for n in ns:
        spaces = setup_level(case, box, n, m, line_q)
        if sig == "auto":
            sig, ct = auto_sigma0(spaces, q_vol, q_edge)
            report.trace_constant = ct
        system = assemble(spaces, sig, case.f, case.dirichlet, q_vol, q_edge)
        coef = solve(system, pd_check=False)
        errs = error_norms(coef, case, spaces, sig, q_vol, q_edge)
        report.ns.append(n)
        report.hs.append(spaces.mesh.h)
        report.n_dofs.append(spaces.layout.total)
        report.errors.append(errs)
    report.sigma0 = float(sig)
    return report


def projection_study(case: ManufacturedCase, m: int, ns, box=(-1, 1, -1, 1),
                     q_vol=None, line_q=None) -> dict:
    """L2-projection error orders: L2 and broken H1, per refinement level."""
    m_q = q_vol if q_vol is not None else m + 3
    rows = []
    for n in ns:
        spaces = setup_level(case, box, n, m, line_q)
        coef = project_l2(case.u, spaces, q=m_q)
        l2_sq, h1_sq = 0.0, 0.0
        for e in range(spaces.mesh.n_elements):
            for rule, side in spaces.element_rules(e, m_q):
                uh, guh = _uh_eval(spaces, coef, e, rule.points, side)
                du = case.u(rule.points, side) - uh
                dg = case.grad(rule.points, side) - guh
                l2_sq += rule.weights @ du**2
                h1_sq += rule.weights @ np.einsum("pk,pk->p", dg, dg)
        rows.append({"n": n, "h": spaces.mesh.h,
                     "l2": float(np.sqrt(l2_sq)), "h1": float(np.sqrt(h1_sq))})
    out = {"rows": rows}
    for key in ("l2", "h1"):
        es = [r[key] for r in rows]
        out[f"rates_{key}"] = [float(np.log2(es[i] / es[i + 1]))
                               for i in range(len(es) - 1)]
    return out


def geometry_probes(curve: InterfaceCurve, ns, box=(-1, 1, -1, 1),
                    grid: int = 6) -> dict:
    """Per-level maxima of the chart-vs-chord deviations and interval band.

    Reports ||T - id||, ||DT - I||_F, |det DT - 1| maxima over all interface
    elements (sampled on interior grids), the band of (xi1 - xi0)/h, and
    least-squares slopes of the log-maxima against log h.
    """
    levels = []
    for n in ns:
        mesh = build_mesh(box, n)
        chart = FrenetChart(curve, h=mesh.h)
        tags = classify_elements(mesh, chart)
        t_dev = dt_dev = det_dev = 0.0
        band_lo, band_hi = np.inf, -np.inf
        for e in tags.interface_elements:
            tag = tags.tags[e]
            xi0, xi1 = tag.interval
            band = (xi1 - xi0) / mesh.h
            band_lo, band_hi = min(band_lo, band), max(band_hi, band)
            cc = chart.chord_chart(xi0, xi1)
            xl, yl, xh, yh = mesh.elem_box(e)
            gx = np.linspace(xl, xh, grid)
            gy = np.linspace(yl, yh, grid)
            X, Y = np.meshgrid(gx, gy)
            pts = np.column_stack([X.ravel(), Y.ravel()])
            eta, xi = chart.inverse(pts, xi_anchor=0.5 * (xi0 + xi1))
            hat = np.column_stack([eta, xi])
            t_dev = max(t_dev, np.max(np.linalg.norm(cc.inverse(pts) - hat, axis=1)))
            DT = cc.transition_jacobian(eta, xi)
            dt_dev = max(dt_dev, np.max(np.linalg.norm(DT - np.eye(2), axis=(1, 2))))
            det = DT[:, 0, 0] * DT[:, 1, 1] - DT[:, 0, 1] * DT[:, 1, 0]
            det_dev = max(det_dev, np.max(np.abs(det - 1.0)))
        levels.append({"n": n, "h": mesh.h, "t_dev": t_dev, "dt_dev": dt_dev,
                       "det_dev": det_dev, "band_lo": band_lo, "band_hi": band_hi,
                       "n_interface": tags.n_interface})

    hs = np.array([lv["h"] for lv in levels])
    out = {"levels": levels}
    for key in ("t_dev", "dt_dev", "det_dev"):
        vals = np.array([lv[key] for lv in levels])
        if np.all(vals > 0):
            out[f"slope_{key}"] = float(np.polyfit(np.log(hs), np.log(vals), 1)[0])
        else:
            out[f"slope_{key}"] = float("nan")
    return out


def trace_probe_study(case: ManufacturedCase, m: int, ns, box=(-1, 1, -1, 1),
                      line_q=None) -> dict:
    """Max/median normalized trace constants per level."""
    levels = []
    for n in ns:
        spaces = setup_level(case, box, n, m, line_q)
        cts = [trace_constant(spaces, e) for e in spaces.tags.interface_elements]
        levels.append({"n": n, "h": spaces.mesh.h,
                       "max": float(np.max(cts)), "median": float(np.median(cts)),
                       "count": len(cts)})
    return {"levels": levels,
            "max_ratio": max(lv["max"] for lv in levels)
            / min(lv["max"] for lv in levels)}


def coercivity_probe(case: ManufacturedCase, m: int, n: int,
                     box=(-1, 1, -1, 1), sigma0="auto", line_q=None) -> dict:
    """Assemble a small level and return the coercivity eigenvalue bound."""
    from .assembly import coercivity_ratio

    spaces = setup_level(case, box, n, m, line_q)
    if sigma0 == "auto":
        sigma0, ct = auto_sigma0(spaces)
    else:
        ct = float("nan")
    system = assemble(spaces, sigma0, case.f, case.dirichlet, with_norm_grams=True)
    return {"sigma0": float(sigma0), "trace_constant": float(ct),
            "min_ratio": coercivity_ratio(system), "n": n, "m": m}
