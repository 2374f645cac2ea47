import numpy as np
import pytest

from frenet_ife.curves import LineCurve, circle
from frenet_ife.frenet import FrenetChart, frenet_apparatus
from frenet_ife.ife_space import (IfeBasis, TensorBasis, build_spaces,
                                  build_x0, monomials_x1, project_l2,
                                  _l_operator_series, _legendre_rows)
from frenet_ife.laplacian import FrenetLaplacian
from frenet_ife.mesh import build_mesh, classify_elements

from oracles import composite_simpson


@pytest.fixture(scope="module")
def circle_spaces():
    mesh = build_mesh((-1, 1, -1, 1), 8)
    chart = FrenetChart(circle(0.6), h=mesh.h)
    tags = classify_elements(mesh, chart)
    return build_spaces(mesh, tags, chart, m=2, beta_minus=1.0, beta_plus=10.0)


def test_x1_monomials():
    assert monomials_x1(1) == [(1, 0), (1, 1)]
    for m in (1, 2, 3):
        mons = monomials_x1(m)
        assert len(mons) == m * (m + 1)
        assert all(j >= 1 for j, _ in mons)   # all vanish at eta = 0


def test_x0_m1_is_trace_polynomials():
    chart = FrenetChart(circle(1.0), h=0.3)
    vecs, _ = build_x0(chart, (0.1, 0.4), 1)
    assert vecs.shape == (2, 2, 2)
    # no eta dependence at all for m=1
    assert np.max(np.abs(vecs[:, 1, :])) == 0.0
    assert np.linalg.matrix_rank(vecs[:, 0, :]) == 2


def test_x0_line_m2_against_explicit_matrix():
    # straight interface: L = d2/deta2 + d2/dxi2 / s^2; constraints reduce to
    # polynomial identities with analytic moments
    line = LineCurve([0.0, 0.0], [1.0, 0.0], -5, 5)
    chart = FrenetChart(line, h=0.5)
    xi0, xi1 = 0.2, 0.9
    vecs, scaling = build_x0(chart, (xi0, xi1), 2)
    assert vecs.shape[0] == 3

    # independent 6x9 constraint matrix over raw monomials eta^j xi^i
    def moment(k):
        return (xi1 ** (k + 1) - xi0 ** (k + 1)) / (k + 1)

    rows = []
    for i in range(3):       # p_eta(0, xi) == 0 coefficient-wise
        r = np.zeros(9)
        r[3 + i] = 1.0       # flat index j*3+i with j=1
        rows.append(r)
    for d in range(3):       # moments of L(p)(0, xi) = 2*p20(xi) + p0''(xi)
        r = np.zeros(9)
        for i in range(3):
            r[6 + i] += 2.0 * moment(d + i)         # 2 eta^2 xi^i term
            if i >= 2:
                r[0 + (i - 2)] += i * (i - 1) * moment(d + i - 2)
        rows.append(r)
    M = np.vstack(rows)
    assert np.linalg.matrix_rank(M) == 6            # nullspace dim 3

    # production vectors satisfy the constraints: check via finite differences
    # of the evaluated polynomial plus Simpson moments
    basis = IfeBasis(chart, _FakeTag((xi0, xi1)), 2, 1.0, 1.0)
    for k in range(3):
        coef_fn = k            # X0 members come first

        def lap_on_line(xi):
            d = 1e-5
            vals = []
            for eta in (-d, 0.0, d):
                v, _, _ = basis.evaluate_ref(np.full_like(xi, eta), xi,
                                             np.ones_like(xi, dtype=int))
                vals.append(v[coef_fn])
            p_etaeta = (vals[0] - 2 * vals[1] + vals[2]) / d**2
            vxx = []
            for dx in (-d, 0.0, d):
                v, _, _ = basis.evaluate_ref(np.zeros_like(xi), xi + dx,
                                             np.ones_like(xi, dtype=int))
                vxx.append(v[coef_fn])
            p_xixi = (vxx[0] - 2 * vxx[1] + vxx[2]) / d**2
            return p_etaeta + p_xixi

        for dtest in range(3):
            mom = composite_simpson(
                lambda s: lap_on_line(np.atleast_1d(s)) * s**dtest, xi0, xi1,
                panels=400)
            assert abs(mom) < 5e-4   # FD-limited accuracy


class _FakeTag:
    def __init__(self, interval):
        self.interval = interval
        self.kind = "interface"
        self.cuts = []


def test_x0_circle_m2_dimension_and_residuals():
    chart = FrenetChart(circle(1.0), h=0.3)
    basis = IfeBasis(chart, _FakeTag((0.0, 0.25)), 2, 1.0, 7.0)
    assert sum(1 for o in basis.origins if o == "x0") == 3
    # residuals evaluated with an independent, much finer line rule
    res = basis.weak_condition_residuals(line_q=20)
    assert np.max(np.abs(res)) <= 1e-10
    # the strong eta-derivative condition holds coefficient-wise
    for k in range(3):
        assert np.max(np.abs(basis.coef[1][k][1, :])) <= 1e-12


@pytest.mark.parametrize("m", [1, 2, 3])
def test_interface_basis_count_and_x1_member(m):
    chart = FrenetChart(circle(1.0), h=0.3)
    basis = IfeBasis(chart, _FakeTag((0.3, 0.55)), m, 2.0, 5.0)
    assert basis.n_basis == (m + 1) ** 2
    # eta/beta is in the basis: X1 monomial (1, 0)
    idx = m + 1   # first X1 member
    assert basis.origins[idx] == "x1"
    jv, jf = basis.interface_jumps(np.linspace(0.3, 0.55, 9))
    assert np.max(np.abs(jv)) <= 1e-13
    assert np.max(np.abs(jf)) <= 1e-12


def test_line_interface_eta_over_beta_shape():
    # straight interface y = 0: the first X1 member is eta/beta_hat up to the
    # conditioning scale, i.e. -y/beta(side) with gradient (0, -1/beta(side))
    line = LineCurve([0.0, 0.0], [1.0, 0.0], -5, 5)
    chart = FrenetChart(line, h=1.2)
    mesh = build_mesh((0, 1, -0.4, 0.6), 1)
    tags = classify_elements(mesh, chart)
    assert tags.tags[0].kind == "interface"
    bm, bp = 2.0, 5.0
    spaces = build_spaces(mesh, tags, chart, 1, bm, bp)
    b = spaces.bases[0]
    idx = 2                      # first X1 member: the (1, 0) monomial
    assert b.origins[idx] == "x1"
    rng = np.random.default_rng(1)
    pts = np.column_stack([rng.uniform(0, 1, 40), rng.uniform(-0.4, 0.6, 40)])
    vals, grads = b.evaluate(pts)
    beta = np.where(pts[:, 1] < 0.0, bp, bm)   # below the line is the plus side
    h_eta = b.scaling.h_eta
    assert np.allclose(vals[idx] * h_eta, -pts[:, 1] / beta, atol=1e-12)
    assert np.allclose(grads[idx, :, 0] * h_eta, 0.0, atol=1e-12)
    assert np.allclose(grads[idx, :, 1] * h_eta, -1.0 / beta, atol=1e-12)


def test_equal_beta_spans_full_tensor_space():
    chart = FrenetChart(circle(1.0), h=0.3)
    for m in (1, 2):
        basis = IfeBasis(chart, _FakeTag((0.1, 0.4)), m, 3.0, 3.0)
        flat = basis.coef[1].reshape(basis.n_basis, -1)
        assert np.linalg.matrix_rank(flat, tol=1e-10) == (m + 1) ** 2
        flat_minus = basis.coef[-1].reshape(basis.n_basis, -1)
        assert np.allclose(flat, flat_minus)


def test_direct_sum_gram_well_conditioned(circle_spaces):
    for e in circle_spaces.tags.interface_elements:
        b = circle_spaces.bases[e]
        g = b.gram_fictitious()
        d = np.sqrt(np.diag(g))
        gn = g / np.outer(d, d)
        w = np.linalg.eigvalsh(gn)
        assert w[0] > 1e-8
        assert w[-1] / w[0] < 1e8


def test_full_constraint_system_cross_check():
    # the decomposition-built basis spans the nullspace of the full
    # two-sided constraint system
    chart = FrenetChart(circle(1.0), h=0.3)
    m, bm, bp = 2, 1.0, 10.0
    interval = (0.2, 0.5)
    basis = IfeBasis(chart, _FakeTag(interval), m, bm, bp)
    sc = basis.scaling
    from frenet_ife.quadrature import interface_line_rule

    rule = interface_line_rule(*interval, 8)
    xbar = sc.xibar(rule.points)
    jets = FrenetLaplacian(chart).coefficient_jets(rule.points, m - 2)
    tests = _legendre_rows(m, xbar)
    nb = (m + 1) ** 2
    rows = []
    for i in range(m + 1):   # value jump: trace coefficients match
        r = np.zeros(2 * nb)
        r[0 * (m + 1) + i] = 1.0
        r[nb + 0 * (m + 1) + i] = -1.0
        rows.append(r)
    for i in range(m + 1):   # flux jump: beta-weighted eta-coefficients match
        r = np.zeros(2 * nb)
        r[1 * (m + 1) + i] = bp
        r[nb + 1 * (m + 1) + i] = -bm
        rows.append(r)
    series = []
    for j in range(m + 1):
        for i in range(m + 1):
            C = np.zeros((m + 1, m + 1))
            C[j, i] = 1.0
            series.append(_l_operator_series(C, sc, jets, xbar, m - 1))
    for jj in range(m - 1):
        for d in range(m + 1):
            r = np.zeros(2 * nb)
            for k in range(nb):
                mom = series[k][jj] @ (rule.weights * tests[d])
                r[k] = bp * mom
                r[nb + k] = -bm * mom
            rows.append(r)
    M = np.vstack(rows)
    ns_dim = 2 * nb - np.linalg.matrix_rank(M, tol=1e-10)
    assert ns_dim == nb
    # every constructed basis function satisfies the full system
    row_norm = np.linalg.norm(M, axis=1, keepdims=True)
    for k in range(basis.n_basis):
        vec = np.concatenate([basis.coef[1][k].ravel(), basis.coef[-1][k].ravel()])
        assert np.max(np.abs((M / row_norm) @ vec)) <= 1e-9


def test_physical_conformity(circle_spaces):
    spaces = circle_spaces
    chart = spaces.chart
    for e in spaces.tags.interface_elements[:6]:
        b = spaces.bases[e]
        tag = spaces.tags.tags[e]
        xa, xb = sorted(c.xi for c in tag.cuts)
        xs = np.linspace(xa + 1e-9, xb - 1e-9, 50)
        pts = chart.curve.point(xs)
        n = frenet_apparatus(chart.curve, xs).n
        vp, gp = b.evaluate(pts, side=1)
        vm, gm = b.evaluate(pts, side=-1)
        flux_p = spaces.beta_plus * np.einsum("bpk,pk->bp", gp, n)
        flux_m = spaces.beta_minus * np.einsum("bpk,pk->bp", gm, n)
        assert np.max(np.abs(vp - vm)) <= 1e-10
        assert np.max(np.abs(flux_p - flux_m)) <= 1e-9


def test_small_cut_sliver_robustness():
    # element whose inside piece has relative area ~1e-6
    from oracles import bisect_root, disk_box_area

    s = 0.25
    r0 = 0.6
    target = 1e-6 * s * s

    def cap_area(eps):
        d = r0 - eps
        return r0**2 * np.arccos(d / r0) - d * np.sqrt(r0**2 - d**2)

    eps = bisect_root(lambda t: cap_area(t) - target, 1e-9, 1e-3)
    box = (r0 - eps, r0 - eps + s, -s / 2, s / 2)
    mesh = build_mesh(box, 1)
    chart = FrenetChart(circle(r0), h=0.25 * np.sqrt(2))
    tags = classify_elements(mesh, chart)
    assert tags.tags[0].kind == "interface"
    spaces = build_spaces(mesh, tags, chart, 2, 1.0, 10.0)
    b = spaces.bases[0]
    g = b.gram_fictitious()
    d = np.sqrt(np.diag(g))
    w = np.linalg.eigvalsh(g / np.outer(d, d))
    assert w[0] > 1e-8 and w[-1] / w[0] < 1e8
    # the tiny piece is still integrated consistently
    from frenet_ife.quadrature import cut_cell_rules

    rules = cut_cell_rules(mesh, 0, tags.tags[0], chart, q=8)
    oracle = disk_box_area(0, 0, r0, (box[0], box[2], box[1], box[3]))
    assert rules[-1].weights.sum() == pytest.approx(oracle, rel=1e-6)
    assert rules[-1].weights.sum() / (s * s) == pytest.approx(1e-6, rel=1e-3)


def test_tensor_basis_partition_of_unity_and_gradients():
    basis = TensorBasis((0.2, -0.1, 0.7, 0.4), m=2, side=1)
    rng = np.random.default_rng(3)
    pts = np.column_stack([rng.uniform(0.2, 0.7, 40), rng.uniform(-0.1, 0.4, 40)])
    vals, grads = basis.evaluate(pts)
    assert np.allclose(vals.sum(axis=0), 1.0, atol=1e-13)
    assert np.allclose(grads.sum(axis=0), 0.0, atol=1e-12)
    d = 1e-6
    vx, _ = basis.evaluate(pts + [d, 0.0])
    vx2, _ = basis.evaluate(pts - [d, 0.0])
    assert np.allclose(grads[..., 0], (vx - vx2) / (2 * d), atol=1e-7)


def test_projection_reproduces_members_and_constants(circle_spaces):
    spaces = circle_spaces
    rng = np.random.default_rng(8)
    e = spaces.tags.interface_elements[0]
    b = spaces.bases[e]

    # local mass solve reproduces a member of the local space exactly
    M = np.zeros((b.n_basis, b.n_basis))
    rhs = np.zeros(b.n_basis)
    for rule, side in spaces.element_rules(e, 5):
        vals, _ = b.evaluate(rule.points, side=side)
        M += (vals * rule.weights) @ vals.T
        rhs += vals @ (rule.weights * vals[4])
    coef_loc = np.linalg.solve(M, rhs)
    box = spaces.mesh.elem_box(e)
    pts = np.column_stack([rng.uniform(box[0], box[2], 30),
                           rng.uniform(box[1], box[3], 30)])
    vals, _ = b.evaluate(pts)
    assert np.max(np.abs(coef_loc @ vals - vals[4])) <= 1e-11

    # constants live in every local space (through the trace block)
    ones = project_l2(lambda p, s: np.ones(len(np.atleast_2d(p))), spaces, q=4)
    for ee in (0, e):
        pts = np.column_stack([rng.uniform(*spaces.mesh.elem_box(ee)[0::2], 10),
                               rng.uniform(*spaces.mesh.elem_box(ee)[1::2], 10)])
        vals, _ = spaces.bases[ee].evaluate(pts)
        assert np.max(np.abs(ones[spaces.layout.dofs(ee)] @ vals - 1.0)) <= 1e-11
