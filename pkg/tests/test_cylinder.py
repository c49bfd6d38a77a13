import numpy as np
import pytest

import cylspec as cs
from cylspec.cylinder import (CylinderOperator, CylinderSolution,
                              _exp_moments_stable, differentiate)
from cylspec.errors import (CriticalWeight, InsufficientTail,
                            PerturbationTooLarge)


@pytest.fixture(scope="module")
def op15(torus_spec_15):
    return CylinderOperator(torus_spec_15, t_final=45.0, step=0.01)


def negative_modes(spec):
    return [int(j) for j in np.flatnonzero(spec.eigenvalues < -spec.cluster_tol)]


def manufactured(spec, tgrid, mode, rate=-1.0):
    """u* = e^{rate t} sin t on one mode, plus the exact rhs with D_C u* = f."""
    u = np.zeros((spec.dim, tgrid.size))
    u[mode] = np.exp(rate * tgrid) * np.sin(tgrid)
    du = np.exp(rate * tgrid) * (rate * np.sin(tgrid) + np.cos(tgrid))
    g = np.zeros_like(u)
    g[mode] = du - spec.eigenvalues[mode] * u[mode]
    return u, spec.jmat @ g   # f = J g since g = -(J f)


def test_exp_moments_match_quadrature():
    from scipy.integrate import quad

    for lam in (-3.0, -0.01, 0.0, 1e-9, 0.02, 2.5):
        for h in (0.01, 0.3):
            mom = _exp_moments_stable(lam, h)
            for p in range(4):
                ref = quad(lambda s: np.exp(lam * (h - s)) * s**p, 0.0, h,
                           epsabs=1e-15, epsrel=1e-13)[0]
                assert mom[p] == pytest.approx(ref, rel=1e-10, abs=1e-18)


def test_differentiate_fourth_order():
    t = np.linspace(0.0, 2.0, 401)
    u = np.exp(-t) * np.cos(3 * t)
    du = -np.exp(-t) * np.cos(3 * t) - 3 * np.exp(-t) * np.sin(3 * t)
    assert np.abs(differentiate(u, t[1] - t[0]) - du).max() <= 1e-6


def test_reduction_identity(op15):
    # J (D_C u) == -u' + A u with the same stencil on both sides
    rng = np.random.default_rng(1)
    t = op15.tgrid[:501]
    spec = op15.base
    u = rng.standard_normal((spec.dim, 3)) @ np.vstack([np.sin(t), np.cos(2 * t), t / 45.0])
    h = op15.step
    du = differentiate(u, h)
    dsig = op15.dirac_sigma()
    dcu = spec.jmat @ du + dsig @ u
    lhs = spec.jmat @ dcu
    rhs = -du + np.diag(spec.eigenvalues) @ u
    assert np.abs(lhs - rhs).max() <= 1e-10 * max(1.0, np.abs(rhs).max())


def test_homogeneous_apply_kernel_element(op15):
    spec = op15.base
    c0 = spec.cluster_at(0.0)
    nu = np.zeros(spec.dim)
    nu[c0.start] = 1.0
    t = np.linspace(0.0, 1.0, 201)
    rep = cs.homogeneous_apply(spec, 0.0, 0, nu, t)
    assert rep.identity_residual <= 1e-10
    assert rep.sup_apply <= 1e-12    # kernel element: D_C(e^{0 t} nu) = 0


def test_homogeneous_apply_polynomial_obstruction(op15):
    # D_C(e^{lam t} t nu) = e^{lam t} J nu for nu in the lam-cluster: never zero
    spec = op15.base
    c1 = spec.cluster_at(1.0)
    nu = np.zeros(spec.dim)
    nu[c1.start] = 1.0
    t = np.linspace(0.0, 1.0, 201)
    rep = cs.homogeneous_apply(spec, 1.0, 1, nu, t)
    assert rep.identity_residual <= 1e-8
    want = np.exp(t)   # |e^{lam t} J nu| = e^{t} |nu|
    assert np.abs(rep.apply_norms - want).max() <= 1e-8 * want.max()


def test_homogeneous_apply_wrong_eigenvalue(op15):
    # j=0 with an off-cluster eigenvector: residual norm |lam - lam'| ||nu|| at t=0
    spec = op15.base
    cm = spec.cluster_at(-1.0)
    nu = np.zeros(spec.dim)
    nu[cm.start] = 1.0
    t = np.linspace(0.0, 1.0, 201)
    lam = 0.25
    rep = cs.homogeneous_apply(spec, lam, 0, nu, t)
    assert rep.apply_norms[0] == pytest.approx(abs(lam - (-1.0)), rel=1e-10)


def test_manufactured_solution_recovery(op15):
    spec = op15.base
    mode = spec.cluster_at(1.0).start
    u_true, f = manufactured(spec, op15.tgrid, mode)
    sol = cs.solve_cylinder(op15, f, weight=-0.5)
    w = np.exp(0.5 * op15.tgrid)
    err = (np.abs(sol.coeffs - u_true).max(axis=0) * w).max()
    scale = (np.abs(u_true).max(axis=0) * w).max()
    assert err / scale <= 1e-8
    assert sol.residual <= 1e-8


def test_zero_rhs_zero_solution(op15):
    f = np.zeros((op15.dim, op15.tgrid.size))
    for weight in (-0.5, 0.5, 1.3):
        sol = cs.solve_cylinder(op15, f, weight)
        assert np.abs(sol.coeffs).max() == 0.0


def test_critical_weight_raises(op15):
    f = np.zeros((op15.dim, op15.tgrid.size))
    for bad in (0.0, 1.0, -1.0):
        with pytest.raises(CriticalWeight):
            cs.solve_cylinder(op15, f, bad)


def test_kernel_in_window(op15):
    assert cs.kernel_in_window(op15, (-0.5, 0.5)).dimension == 4
    assert cs.kernel_in_window(op15, (0.1, 0.9)).dimension == 0
    assert cs.kernel_in_window(op15, (-1.2, 1.2)).dimension == 20
    with pytest.raises(CriticalWeight):
        cs.kernel_in_window(op15, (0.0, 0.5))


def test_kernel_window_matches_wall_crossing(torus_spec_15, op15):
    # window dimension = sum of d_lam = wall-crossing jump on the same spectrum
    ends = cs.EndSystem((torus_spec_15,))
    rng = np.random.default_rng(9)
    ev = torus_spec_15.eigenvalues
    done = 0
    while done < 50:
        a, b = np.sort(rng.uniform(-1.2, 1.2, size=2))
        if b - a < 1e-3 or min(np.abs(ev - a).min(), np.abs(ev - b).min()) < 1e-4:
            continue
        dim = cs.kernel_in_window(op15, (a, b)).dimension
        jump, _ = cs.wall_crossing([a], [b], ends)
        assert dim == jump
        done += 1


def test_asymptotic_limit_two_term(op15):
    spec = op15.base
    t = op15.tgrid
    c0 = spec.cluster_at(0.0)
    nu0 = np.zeros(spec.dim)
    nu0[c0.start:c0.stop] = (1.0, -2.0, 0.5, 3.0)
    rho = np.random.default_rng(7).standard_normal(spec.dim)
    u = nu0[:, None] * np.ones_like(t)[None, :] + rho[:, None] * np.exp(-t)[None, :]
    sol = CylinderSolution(u, t, 0.0, 0.0, 0.0, spec)
    lim = cs.asymptotic_limit(sol, 0.0, -1.0)
    assert np.abs(lim.coefficient - nu0).max() <= 1e-6
    assert lim.fitted_rate == pytest.approx(-1.0, rel=0.1)


def test_asymptotic_limit_fast_decay_maps_to_zero(op15):
    spec = op15.base
    t = op15.tgrid
    rho = np.random.default_rng(8).standard_normal(spec.dim)
    u = rho[:, None] * np.exp(-t)[None, :]
    sol = CylinderSolution(u, t, 0.0, 0.0, 0.0, spec)
    lim = cs.asymptotic_limit(sol, 0.0, -1.0)
    assert lim.coefficient_norm() <= 1e-6 * np.linalg.norm(rho)


def test_asymptotic_limit_converges_with_t(torus_spec_15):
    rng = np.random.default_rng(12)
    rho = rng.standard_normal(torus_spec_15.dim)
    c0 = torus_spec_15.cluster_at(0.0)
    nu0 = np.zeros(torus_spec_15.dim)
    nu0[c0.start:c0.stop] = (0.3, 1.0, -0.7, 0.2)
    errs = []
    for t_final in (20.0, 26.0, 34.0):
        op = CylinderOperator(torus_spec_15, t_final, 0.01)
        t = op.tgrid
        u = nu0[:, None] * np.ones_like(t)[None, :] + rho[:, None] * np.exp(-t)[None, :]
        sol = CylinderSolution(u, t, 0.0, 0.0, 0.0, torus_spec_15)
        lim = cs.asymptotic_limit(sol, 0.0, -1.0)
        errs.append(np.abs(lim.coefficient - nu0).max())
    assert errs[1] < errs[0] and errs[2] < errs[1]


def test_asymptotic_limit_insufficient_tail(torus_spec_15):
    op = CylinderOperator(torus_spec_15, 10.0, 0.01)
    t = op.tgrid
    u = np.zeros((torus_spec_15.dim, t.size))
    sol = CylinderSolution(u, t, 0.0, 0.0, 0.0, torus_spec_15)
    with pytest.raises(InsufficientTail):
        cs.asymptotic_limit(sol, 0.0, -1.0)   # needs T >= 20


def test_cutoff_extension(op15):
    spec = op15.base
    c0 = spec.cluster_at(0.0)
    nu0 = np.zeros(spec.dim)
    nu0[c0.start] = 2.0
    from cylspec.cylinder import AsymptoticLimit, extend_with_cutoff

    lim = AsymptoticLimit(nu0, None, 0.0)
    t = op15.tgrid
    ext = extend_with_cutoff(lim, t, t0=5.0)
    assert np.abs(ext[:, t <= 5.0]).max() == 0.0
    tail = t >= 6.0
    assert np.abs(ext[c0.start, tail] - 2.0).max() <= 1e-12
    # smoothstep is monotone on [t0, t0+1]
    mid = (t > 5.0) & (t < 6.0)
    vals = ext[c0.start, mid]
    assert np.all(np.diff(vals) >= 0)


def test_perturbed_count_eps0(torus_spec_15):
    op = CylinderOperator(torus_spec_15, 30.0, 0.01)
    s = negative_modes(torus_spec_15)
    assert cs.perturbed_kernel_count(op, 0.5, s).dimension == 4
    assert cs.perturbed_kernel_count(op, -0.5, s).dimension == 0
    # without boundary conditions the count is the full decaying dimension
    assert cs.perturbed_kernel_count(op, 0.5, []).dimension == 12


def test_perturbed_count_stability(torus_spec_15):
    s = negative_modes(torus_spec_15)
    for eps in (1e-3, 5e-4, 2.5e-4):
        pert = cs.make_perturbation(torus_spec_15.dim, eps, -1.0, seed=11)
        op = CylinderOperator(torus_spec_15, 30.0, 0.01, pert)
        assert cs.perturbed_kernel_count(op, 0.5, s).dimension == 4
        assert cs.perturbed_kernel_count(op, -0.5, s).dimension == 0


def test_perturbed_count_jump_across_root(torus_spec_15):
    s = negative_modes(torus_spec_15)
    pert = cs.make_perturbation(torus_spec_15.dim, 1e-3, -1.0, seed=11)
    op = CylinderOperator(torus_spec_15, 30.0, 0.01, pert)
    below = cs.perturbed_kernel_count(op, -0.5, s).dimension
    above = cs.perturbed_kernel_count(op, 0.5, s).dimension
    assert above - below == 4


def test_perturbation_too_large(torus_spec_15):
    pert = cs.make_perturbation(torus_spec_15.dim, 0.4, -1.0, seed=2)
    op = CylinderOperator(torus_spec_15, 30.0, 0.01, pert)
    with pytest.raises(PerturbationTooLarge):
        cs.perturbed_kernel_count(op, 0.5, [])


def test_boundary_set_recorded(torus_spec_15):
    op = CylinderOperator(torus_spec_15, 30.0, 0.01)
    s = negative_modes(torus_spec_15)
    count = cs.perturbed_kernel_count(op, 0.5, s)
    assert list(count.boundary_set) == s
    assert '"boundary_set"' in count.to_json()


def test_manufactured_recovery_many_weights(op15):
    # recovery must hold for every non-critical weight whose weighted space
    # contains the manufactured profile (profile rate below the weight)
    spec = op15.base
    mode = spec.cluster_at(1.0).start
    for weight, rate in ((-1.2, -1.7), (-0.5, -1.0), (0.35, -1.0),
                         (0.7, -1.0), (1.2, -0.3)):
        u_true, f = manufactured(spec, op15.tgrid, mode, rate=rate)
        sol = cs.solve_cylinder(op15, f, weight)
        w = np.exp(-weight * op15.tgrid)
        err = (np.abs(sol.coeffs - u_true).max(axis=0) * w).max()
        scale = (np.abs(u_true).max(axis=0) * w).max()
        assert err / scale <= 1e-8, f"weight {weight}"


def test_kernel_element_asymptotics(op15):
    # an element of kernel_in_window recovers its own coefficient at its rate
    # and maps to zero at any faster root
    kw = cs.kernel_in_window(op15, (-1.2, 1.2))
    spec = op15.base
    t = op15.tgrid
    k = 0   # element at lambda = -1
    lam = float(kw.lambdas[k])
    u = kw.element(k, t)
    sol = CylinderSolution(u, t, lam, 0.0, 0.0, spec)
    lim = cs.asymptotic_limit(sol, lam, lam - 1.0)
    want = np.zeros(spec.dim)
    want[kw.indices[k]] = 1.0
    assert np.abs(lim.coefficient - want).max() <= 1e-8
    lim_fast = cs.asymptotic_limit(sol, lam + 1.0, lam)
    assert lim_fast.coefficient_norm() <= 1e-8


def test_kernel_limits_feed_symplectic_verifier(op15):
    # close the loop: extract asymptotic limits of zero-rate kernel elements,
    # map them to constant-section fiber vectors, and run the Lagrangian test
    from cylspec.models import I3, build_torus_model

    spec = op15.base
    model = build_torus_model(cs.square_torus(), 1.5)
    t = op15.tgrid
    kw = cs.kernel_in_window(op15, (-0.5, 0.5))
    assert kw.dimension == 4
    coeffs = []
    for k in range(kw.dimension):
        sol = CylinderSolution(kw.element(k, t), t, 0.0, 0.0, 0.0, spec)
        lim = cs.asymptotic_limit(sol, 0.0, -1.0)
        coeffs.append(lim.coefficient)
    c0 = spec.cluster_at(0.0)
    # eigencoordinate coefficients -> constant-section fiber components
    v0 = spec.eigenvectors[:, c0.start:c0.stop]
    fiber = (v0[:4, :] @ np.array(coeffs).T[c0.start:c0.stop, :]) * np.sqrt(model.area)
    sk = cs.symplectic_form(np.eye(4), I3.T, model.area, kernel=np.eye(4))
    # the span of all four limits is the whole kernel: not Lagrangian
    assert not cs.is_lagrangian(fiber, sk)
    # a half-dimensional isotropic slice of it is
    gram = fiber.T @ sk.form @ fiber
    pairs = [(a, b) for a in range(4) for b in range(a + 1, 4)
             if abs(gram[a, b]) <= 1e-9 * model.area]
    assert pairs, "some isotropic pair of limits must exist"
    a, b = pairs[0]
    assert cs.is_lagrangian(fiber[:, [a, b]], sk)
