"""Symmetric interior-penalty DG assembly, sparse solve, and stability probes.

The bilinear form sums element stiffness integrals and, over every edge
(boundary edges included, where jump and average both mean the trace),
the consistency/symmetry terms pairing the average flux with the solution
jump, plus the penalty sigma0*gamma/h on the jumps, gamma = beta_plus^2 /
beta_minus.  Dirichlet data enters weakly through the boundary linear form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import NonConvergence, NotPositiveDefinite, SingularGram
from .ife_space import SpaceSet
from .quadrature import cut_edge_rule


@dataclass
class SipdgSystem:
    """Assembled sparse system S c = F with its penalty bookkeeping."""

    S: sp.csr_matrix
    F: np.ndarray
    sigma0: float
    gamma: float
    penalty: float
    spaces: SpaceSet
    norm_gram: sp.csr_matrix | None = None
    energy_gram: sp.csr_matrix | None = None


def edge_segments(spaces: SpaceSet, k: int, q: int):
    """Quadrature segments of edge k with branch labels: [(pts, w, side)]."""
    mesh = spaces.mesh
    cuts = spaces.tags.edge_cuts.get(k, [])
    ts = [c.t for c in cuts if 1e-12 < c.t < 1.0 - 1e-12]
    a, b = mesh.edge_a[k], mesh.edge_b[k]
    out = []
    for seg in cut_edge_rule(a, b, ts, q):
        mid = a + 0.5 * (seg.t0 + seg.t1) * (b - a)
        side = 1 if spaces.chart.signed_distance_estimate(mid) > 0 else -1
        out.append((seg.points, seg.weights, side))
    return out


class _Triplets:
    def __init__(self):
        self.rows, self.cols, self.vals = [], [], []

    def add(self, block, row_dofs, col_dofs):
        r, c = np.meshgrid(row_dofs, col_dofs, indexing="ij")
        self.rows.append(r.ravel())
        self.cols.append(c.ravel())
        self.vals.append(np.asarray(block).ravel())

    def matrix(self, n):
        return sp.coo_matrix(
            (np.concatenate(self.vals),
             (np.concatenate(self.rows), np.concatenate(self.cols))),
            shape=(n, n)).tocsr()


def assemble(spaces: SpaceSet, sigma0: float, f_source, g_dirichlet,
             q_vol: int | None = None, q_edge: int | None = None,
             with_norm_grams: bool = False) -> SipdgSystem:
    """Assemble the penalized system; optionally also the norm Gram matrices.

    f_source(points, side) and g_dirichlet(points, side) return values at
    quadrature points.  The norm Grams realize the broken norm (gradient +
    penalized jumps) and the energy norm (plus weighted flux averages).
    """
    mesh, layout = spaces.mesh, spaces.layout
    m = spaces.m
    q_vol = q_vol if q_vol is not None else m + 2
    q_edge = q_edge if q_edge is not None else m + 3
    gamma = spaces.beta_plus**2 / spaces.beta_minus
    pen = sigma0 * gamma / mesh.h

    trip = _Triplets()
    trip_jump = _Triplets() if with_norm_grams else None
    trip_flux = _Triplets() if with_norm_grams else None
    trip_vol = _Triplets() if with_norm_grams else None
    F = np.zeros(layout.total)

    for e in range(mesh.n_elements):
        basis = spaces.bases[e]
        dofs = layout.dofs(e)
        K = np.zeros((basis.n_basis, basis.n_basis))
        Fe = np.zeros(basis.n_basis)
        for rule, side in spaces.element_rules(e, q_vol):
            beta = float(spaces.beta_of(side))
            vals, grads = basis.evaluate(rule.points, side=side)
            K += beta * np.einsum("bpk,p,cpk->bc", grads, rule.weights, grads)
            Fe += vals @ (rule.weights * f_source(rule.points, side))
        trip.add(K, dofs, dofs)
        if with_norm_grams:
            trip_vol.add(K, dofs, dofs)
        F[dofs] += Fe

    for k in range(mesh.n_edges):
        n_e = mesh.edge_normal[k]
        e1, e2 = mesh.edge_elems[k]
        interior = e2 >= 0
        members = [(e1, 1.0)] + ([(e2, -1.0)] if interior else [])
        avg = 0.5 if interior else 1.0
        for pts, w, side in edge_segments(spaces, k, q_edge):
            beta = float(spaces.beta_of(side))
            V, B, D = [], [], []
            for e, _sign in members:
                vals, grads = spaces.bases[e].evaluate(pts, side=side)
                V.append(vals)
                B.append(beta * np.einsum("bpk,k->bp", grads, n_e))
                D.append(layout.dofs(e))
            for ia, (ea, sa) in enumerate(members):
                for ib, (eb, sb) in enumerate(members):
                    blk = (-avg * sa * (V[ia] * w) @ B[ib].T
                           - avg * sb * (B[ia] * w) @ V[ib].T
                           + pen * sa * sb * (V[ia] * w) @ V[ib].T)
                    trip.add(blk, D[ia], D[ib])
                    if with_norm_grams:
                        trip_jump.add(pen * sa * sb * (V[ia] * w) @ V[ib].T,
                                      D[ia], D[ib])
                        trip_flux.add((avg * avg / pen) * (B[ia] * w) @ B[ib].T,
                                      D[ia], D[ib])
            if not interior:
                g = g_dirichlet(pts, side)
                F[D[0]] += (-B[0] + pen * V[0]) @ (w * g)

    n = layout.total
    S = trip.matrix(n)
    system = SipdgSystem(S=S, F=F, sigma0=sigma0, gamma=gamma, penalty=pen,
                         spaces=spaces)
    if with_norm_grams:
        Gv = trip_vol.matrix(n)
        Gj = trip_jump.matrix(n)
        Gf = trip_flux.matrix(n)
        system.norm_gram = Gv + Gj
        system.energy_gram = Gv + Gj + Gf
    return system


def smallest_eigenvalue(S: sp.csr_matrix, dense_limit: int = 2500) -> float:
    n = S.shape[0]
    if n <= dense_limit:
        return float(np.linalg.eigvalsh(S.toarray())[0])
    w = spla.eigsh(S, k=1, which="SA", tol=1e-6, maxiter=5000,
                   return_eigenvectors=False)
    return float(w[0])


def solve(system: SipdgSystem, pd_check: bool | None = None) -> np.ndarray:
    """Direct sparse solve with a residual contract of 1e-11.

    pd_check defaults to on for small systems; a non-positive eigenvalue
    reports NotPositiveDefinite (penalty below the coercivity threshold).
    """
    n = system.S.shape[0]
    if pd_check is None:
        pd_check = n <= 2500
    if pd_check and smallest_eigenvalue(system.S) <= 0.0:
        raise NotPositiveDefinite(
            "stiffness matrix has a non-positive eigenvalue; increase sigma0")
    c = spla.spsolve(system.S.tocsc(), system.F)
    resid = np.linalg.norm(system.S @ c - system.F) / max(np.linalg.norm(system.F), 1e-300)
    if resid > 1e-11:
        raise NonConvergence(f"linear solve residual {resid:.2e} > 1e-11")
    return c


def trace_constant(spaces: SpaceSet, e: int,
                   q_vol: int | None = None, q_edge: int | None = None) -> float:
    """Normalized trace constant of one element.

    Largest generalized eigenvalue of the boundary flux Gram against the
    weighted stiffness (constants deflated), scaled by sqrt(h)*sqrt(beta-)/
    beta+; bounded uniformly in h, cut position and beta.
    """
    mesh = spaces.mesh
    m = spaces.m
    q_vol = q_vol if q_vol is not None else m + 2
    q_edge = q_edge if q_edge is not None else m + 3
    basis = spaces.bases[e]
    nb = basis.n_basis
    A = np.zeros((nb, nb))
    B = np.zeros((nb, nb))
    for rule, side in spaces.element_rules(e, q_vol):
        beta = float(spaces.beta_of(side))
        _, grads = basis.evaluate(rule.points, side=side)
        A += beta * np.einsum("bpk,p,cpk->bc", grads, rule.weights, grads)
    for k in mesh.elem_edges[e]:
        for pts, w, side in edge_segments(spaces, k, q_edge):
            beta = float(spaces.beta_of(side))
            _, grads = basis.evaluate(pts, side=side)
            B += beta**2 * np.einsum("bpk,p,cpk->bc", grads, w, grads)
    lam, vecs = np.linalg.eigh(A)
    keep = lam > 1e-10 * lam[-1]
    if not np.any(keep):
        raise SingularGram("element stiffness has no non-constant block")
    W = vecs[:, keep]
    lam_max = scipy.linalg.eigh(W.T @ B @ W, W.T @ A @ W,
                                eigvals_only=True)[-1]
    return float(np.sqrt(lam_max * mesh.h) * np.sqrt(spaces.beta_minus)
                 / spaces.beta_plus)


def auto_sigma0(spaces: SpaceSet, q_vol: int | None = None,
                q_edge: int | None = None) -> tuple[float, float]:
    """Penalty from the trace probe: sigma0 = 4*max_K C_t(K)^2 + 1.

    Probes every interface element plus one uncut element; returns
    (sigma0, max C_t).  Satisfies the coercivity requirement
    sigma0 > C_t^2 + 1/2 with margin.
    """
    elems = list(spaces.tags.interface_elements)
    for e in range(spaces.mesh.n_elements):
        if spaces.tags.tags[e].kind == "plain":
            elems.append(e)
            break
    ct = max(trace_constant(spaces, e, q_vol, q_edge) for e in elems)
    return 4.0 * ct**2 + 1.0, ct


def coercivity_ratio(system: SipdgSystem) -> float:
    """min over the discrete space of a_h(v, v) / |||v|||_h^2 (dense probe)."""
    if system.energy_gram is None:
        raise ValueError("assemble with with_norm_grams=True first")
    S = system.S.toarray()
    G = system.energy_gram.toarray()
    S = 0.5 * (S + S.T)
    G = 0.5 * (G + G.T)
    w = scipy.linalg.eigh(S, G, eigvals_only=True)
    return float(w[0])
