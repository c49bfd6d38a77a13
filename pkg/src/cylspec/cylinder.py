"""Half-cylinder model operator in the eigenbasis of A = J D.

Composing the cylinder operator with J on the left turns it into
-d/dt + A, so in M-orthonormal A-eigencoordinates the equation decouples
into scalar modes

    u_j' - lam_j u_j = g_j,     g = -(J f).

Everything in this module works in those eigencoordinates: vectors are
mode-coefficient arrays, the complex structure is the matrix ``jmat`` of J
in the eigenbasis, and exponentials e^{lam t} are exact.  The weighted
Green solver integrates each mode from the end that keeps e^{-w t} u
bounded; kernel elements in a root window are pure exponentials (no
polynomial-in-t solutions exist); the asymptotic limit map projects the
far tail onto a root cluster; and the perturbed kernel counter marches a
decaying frame backward and counts rank against boundary conditions.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import (CriticalWeight, IllConditionedMatching, InsufficientTail,
                     PerturbationTooLarge)
from .spectral import Spectrum


# ---------------------------------------------------------------------------
# uniform-grid differentiation, 4th order (one-sided at the boundaries)

def differentiate(values: np.ndarray, h: float) -> np.ndarray:
    """d/dt along the last axis of a uniform grid; 4th-order stencils."""
    u = np.asarray(values, dtype=float)
    n = u.shape[-1]
    if n < 5:
        raise ValueError("need at least 5 grid points for the 4th-order stencil")
    du = np.empty_like(u)
    du[..., 2:-2] = (u[..., :-4] - 8 * u[..., 1:-3] + 8 * u[..., 3:-1] - u[..., 4:]) / (12 * h)
    du[..., 0] = (-25 * u[..., 0] + 48 * u[..., 1] - 36 * u[..., 2]
                  + 16 * u[..., 3] - 3 * u[..., 4]) / (12 * h)
    du[..., 1] = (-3 * u[..., 0] - 10 * u[..., 1] + 18 * u[..., 2]
                  - 6 * u[..., 3] + u[..., 4]) / (12 * h)
    du[..., -2] = (3 * u[..., -1] + 10 * u[..., -2] - 18 * u[..., -3]
                   + 6 * u[..., -4] - u[..., -5]) / (12 * h)
    du[..., -1] = (25 * u[..., -1] - 48 * u[..., -2] + 36 * u[..., -3]
                   - 16 * u[..., -4] + 3 * u[..., -5]) / (12 * h)
    return du


def smoothstep(x):
    """C^1 cutoff profile: 0 for x <= 0, 1 for x >= 1, 3x^2 - 2x^3 between."""
    t = np.clip(x, 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


# ---------------------------------------------------------------------------
# operator

@dataclass(frozen=True)
class Perturbation:
    """Exponentially decaying coupling eps * e^{mu_pert t} * A0 with seeded,
    symmetric (hence mass-self-adjoint in eigencoordinates) A0 of unit norm."""

    eps: float
    mu_pert: float
    seed: int
    coupling: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.mu_pert >= 0:
            raise ValueError("mu_pert must be negative (decaying coupling)")


def make_perturbation(dim: int, eps: float, mu_pert: float, seed: int = 0) -> Perturbation:
    rng = np.random.default_rng(seed)
    r = rng.standard_normal((dim, dim))
    a0 = 0.5 * (r + r.T)
    a0 /= np.linalg.norm(a0, 2)
    return Perturbation(float(eps), float(mu_pert), int(seed), a0)


@dataclass(frozen=True)
class CylinderOperator:
    """Mode-decomposed model operator on [0, T] with uniform step h."""

    base: Spectrum
    t_final: float = 30.0
    step: float = 0.01
    perturbation: Perturbation | None = None

    def __post_init__(self):
        if self.base.jmat is None:
            raise ValueError("cylinder operators need a spectrum with jmat attached")

    @property
    def dim(self) -> int:
        return self.base.dim

    @property
    def tgrid(self) -> np.ndarray:
        n = int(round(self.t_final / self.step))
        return np.linspace(0.0, n * self.step, n + 1)

    def dirac_sigma(self) -> np.ndarray:
        """D expressed in eigencoordinates: D = -J A."""
        return -self.base.jmat @ np.diag(self.base.eigenvalues)

    def weight_tol(self) -> float:
        return 1e-8 * max(self.base.spectral_radius, 1e-30)

    def check_weight(self, weight: float):
        gap = float(np.abs(self.base.eigenvalues - weight).min())
        if gap <= self.weight_tol():
            raise CriticalWeight(
                f"weight {weight:.6g} is within {gap:.3e} of an eigenvalue")
        return gap


@dataclass(frozen=True)
class CylinderSolution:
    coeffs: np.ndarray       # (dim, nt) mode coefficients on the grid
    tgrid: np.ndarray
    weight: float
    residual: float          # weighted relative residual of the mode equations
    weighted_sup: float      # sup_t |e^{-w t} u(t)|
    spectrum: Spectrum


# ---------------------------------------------------------------------------
# identity check for homogeneous sections

@dataclass(frozen=True)
class HomogeneousApply:
    identity_residual: float
    apply_norms: np.ndarray
    tgrid: np.ndarray

    @property
    def sup_apply(self) -> float:
        return float(self.apply_norms.max())


def homogeneous_apply(spectrum: Spectrum, lam: float, j: int, nu: np.ndarray,
                      t_samples: np.ndarray) -> HomogeneousApply:
    """Apply the cylinder operator to e^{lam t} t^j nu and compare with the
    product-rule expansion; the time derivative uses the grid stencil, so the
    residual measures stencil error only (near zero for smooth data).

    nu is a mode-coefficient vector.  For j = 0 and nu in the lam-cluster the
    section is an exact kernel element; for j >= 1 the polynomial factor
    obstructs the kernel equation by j e^{lam t} t^{j-1} J nu.
    """
    if j < 0:
        raise ValueError("polynomial degree j must be >= 0")
    if spectrum.jmat is None:
        raise ValueError("spectrum carries no jmat")
    t = np.asarray(t_samples, dtype=float)
    h = t[1] - t[0]
    if np.abs(np.diff(t) - h).max() > 1e-12 * max(h, 1.0):
        raise ValueError("t_samples must be uniform")
    nu = np.asarray(nu, dtype=float)
    jmat = spectrum.jmat
    dsig = -jmat @ np.diag(spectrum.eigenvalues)

    profile = np.exp(lam * t) * t**j
    u = nu[:, None] * profile[None, :]
    lhs = jmat @ differentiate(u, h) + dsig @ u
    core = (lam * (jmat @ nu) + dsig @ nu)[:, None] * profile[None, :]
    if j > 0:
        core = core + (jmat @ nu)[:, None] * (j * np.exp(lam * t) * t**(j - 1))[None, :]
    residual = float(np.linalg.norm(lhs - core, axis=0).max())
    return HomogeneousApply(residual, np.linalg.norm(core, axis=0), t)


# ---------------------------------------------------------------------------
# weighted Green solver

def _lagrange_exp_weights(lam: float, h: float, offsets: np.ndarray) -> np.ndarray:
    """Weights w_j with  integral_0^h e^{lam(h-tau)} g(tau) dtau ~ sum w_j g(offsets_j)
    for the cubic interpolant of g through the offset nodes."""
    moments = _exp_moments_stable(lam, h)
    w = np.empty(offsets.size)
    for jn, x in enumerate(offsets):
        others = np.delete(offsets, jn)
        poly = np.poly(others) / np.prod(x - others)   # highest power first
        coeffs = poly[::-1]                            # c_p tau^p
        w[jn] = float(coeffs @ moments[:coeffs.size])
    return w


def _exp_moments_stable(lam: float, h: float, pmax: int = 3) -> np.ndarray:
    """I_p = integral_0^h e^{lam (h - tau)} tau^p dtau for p = 0..pmax.

    Downward recurrence in the well-conditioned regime, series near lam*h = 0
    where the recurrence cancels catastrophically."""
    out = np.empty(pmax + 1)
    z = lam * h
    if abs(z) < 0.25:
        for p in range(pmax + 1):
            acc = 0.0
            term = h ** (p + 1) / (p + 1)        # q = 0 term
            q = 0
            while True:
                acc += term
                if abs(term) < 1e-25 * max(abs(acc), h ** (p + 1)) or q > 40:
                    break
                q += 1
                term *= z / (p + q + 1)
            out[p] = acc
    else:
        out[0] = (np.exp(z) - 1.0) / lam
        for p in range(1, pmax + 1):
            out[p] = (p * out[p - 1] - h ** p) / lam
    return out


def _mode_step_integrals(lam: float, h: float, g: np.ndarray) -> np.ndarray:
    """Q_k = integral over [t_k, t_{k+1}] of e^{lam(t_{k+1}-s)} g(s) ds for every step,
    using cubic interpolation of g (4th-order accurate)."""
    nt = g.size
    if nt < 4:
        raise ValueError("grid too short for the cubic interpolant")
    q = np.empty(nt - 1)
    w_int = _lagrange_exp_weights(lam, h, np.array([-h, 0.0, h, 2 * h]))
    w_first = _lagrange_exp_weights(lam, h, np.array([0.0, h, 2 * h, 3 * h]))
    w_last = _lagrange_exp_weights(lam, h, np.array([-2 * h, -h, 0.0, h]))
    q[0] = w_first @ g[:4]
    q[-1] = w_last @ g[-4:]
    ks = np.arange(1, nt - 2)
    q[1:nt - 2] = (w_int[0] * g[ks - 1] + w_int[1] * g[ks]
                   + w_int[2] * g[ks + 1] + w_int[3] * g[ks + 2])
    return q


def solve_cylinder(op: CylinderOperator, rhs, weight: float) -> CylinderSolution:
    """Weighted Green solve of the unperturbed cylinder equation.

    rhs: array (dim, nt) of mode functions f_j(t_k), or a callable t -> (dim,).
    Modes with lam_j < weight integrate forward from u(0) = 0; modes with
    lam_j > weight integrate backward from u(T) = 0, so e^{-w t} u stays
    bounded.  Raises CriticalWeight when the weight hits an eigenvalue.
    """
    if op.perturbation is not None:
        raise ValueError("solve_cylinder handles the unperturbed operator only")
    op.check_weight(weight)
    t = op.tgrid
    nt = t.size
    h = op.step
    if callable(rhs):
        f = np.stack([np.asarray(rhs(tk), dtype=float) for tk in t], axis=1)
    else:
        f = np.asarray(rhs, dtype=float)
    if f.shape != (op.dim, nt):
        raise ValueError(f"rhs has shape {f.shape}, expected {(op.dim, nt)}")

    g = -(op.base.jmat @ f)
    lams = op.base.eigenvalues
    u = np.zeros_like(g)
    for jm in range(op.dim):
        lam = float(lams[jm])
        q = _mode_step_integrals(lam, h, g[jm])
        if lam < weight:
            grow = np.exp(lam * h)
            for k in range(nt - 1):
                u[jm, k + 1] = grow * u[jm, k] + q[k]
        else:
            shrink = np.exp(-lam * h)
            for k in range(nt - 2, -1, -1):
                u[jm, k] = shrink * (u[jm, k + 1] - q[k])

    wfac = np.exp(-weight * t)
    du = differentiate(u, h)
    resid = du - lams[:, None] * u - g
    scale = float((np.linalg.norm(g, axis=0) * wfac).max())
    residual = float((np.linalg.norm(resid, axis=0) * wfac).max()) / max(scale, 1e-300)
    weighted_sup = float((np.linalg.norm(u, axis=0) * wfac).max())
    return CylinderSolution(u, t, float(weight), residual, weighted_sup, op.base)


# ---------------------------------------------------------------------------
# kernel elements in a root window

@dataclass(frozen=True)
class WindowKernel:
    """Basis of kernel elements e^{lam_j t} e_j with lam_j in the window; the
    basis is exponential-only (polynomial-in-t factors are obstructed)."""

    lambdas: np.ndarray    # (K,) eigenvalue per basis element
    indices: np.ndarray    # (K,) mode index per basis element
    dimension: int
    spectrum: Spectrum

    def element(self, k: int, tgrid: np.ndarray) -> np.ndarray:
        out = np.zeros((self.spectrum.dim, tgrid.size))
        out[self.indices[k]] = np.exp(self.lambdas[k] * np.asarray(tgrid))
        return out


def kernel_in_window(op: CylinderOperator, window: tuple[float, float]) -> WindowKernel:
    """Exponential kernel basis for rates strictly between the window endpoints;
    endpoint weights must be non-critical."""
    lo, hi = float(window[0]), float(window[1])
    if not lo < hi:
        raise ValueError("window must satisfy lo < hi")
    op.check_weight(lo)
    op.check_weight(hi)
    lams = op.base.eigenvalues
    mask = (lams > lo) & (lams < hi)
    idx = np.flatnonzero(mask)
    return WindowKernel(lams[idx], idx, int(idx.size), op.base)


# ---------------------------------------------------------------------------
# asymptotic limit map

@dataclass(frozen=True)
class AsymptoticLimit:
    coefficient: np.ndarray   # (dim,) mode coefficients, supported on the lam cluster
    fitted_rate: float | None
    lam: float

    def coefficient_norm(self) -> float:
        return float(np.linalg.norm(self.coefficient))


def asymptotic_limit(sol: CylinderSolution, lam: float, lam1: float) -> AsymptoticLimit:
    """Extract the e^{lam t} coefficient of a solution and the decay rate of
    the remainder.

    The coefficient is the cluster projection of e^{-lam t} u(t) averaged over
    the final quarter of the grid; the remainder rate comes from a log-linear
    fit over the final half.  Needs lam1 < lam and a tail long enough to
    separate the two rates (T >= 20 / (lam - lam1), at least 10 points and one
    decay decade in the fit window), else InsufficientTail.
    """
    if not lam1 < lam:
        raise ValueError("need lam1 < lam")
    t = sol.tgrid
    tfinal = float(t[-1])
    sep = lam - lam1
    if tfinal < 20.0 / sep:
        raise InsufficientTail(
            f"grid length {tfinal:.3g} is shorter than 20/|lam-lam1| = {20.0 / sep:.3g}")
    tail = t >= 0.75 * tfinal
    fitwin = t >= 0.5 * tfinal
    if tail.sum() < 10 or sep * 0.5 * tfinal < np.log(10.0):
        raise InsufficientTail("tail window too short for a stable extraction")

    spec = sol.spectrum
    cluster = spec.cluster_at(lam)
    coeff = np.zeros(spec.dim)
    if cluster is not None:
        damped = sol.coeffs[cluster.start:cluster.stop, :] * np.exp(-lam * t)[None, :]
        coeff[cluster.start:cluster.stop] = damped[:, tail].mean(axis=1)

    remainder = sol.coeffs - coeff[:, None] * np.exp(lam * t)[None, :]
    rnorm = np.linalg.norm(remainder[:, fitwin], axis=0)
    tfit = t[fitwin]
    good = rnorm > 1e-280
    if good.sum() >= 10:
        slope = np.polyfit(tfit[good], np.log(rnorm[good]), 1)[0]
        rate = float(slope)
    else:
        rate = None
    return AsymptoticLimit(coeff, rate, float(lam))


def extend_with_cutoff(limit: AsymptoticLimit, tgrid: np.ndarray, t0: float) -> np.ndarray:
    """Cutoff extension of a limit coefficient back to the grid:
    chi(t - t0) e^{lam t} coeff, with the smoothstep profile chi."""
    t = np.asarray(tgrid, dtype=float)
    chi = smoothstep(t - t0)
    return limit.coefficient[:, None] * (chi * np.exp(limit.lam * t))[None, :]


# ---------------------------------------------------------------------------
# perturbed kernel counting

@dataclass(frozen=True)
class KernelCount:
    dimension: int
    decaying_dim: int            # dim of the subspace decaying at the far end
    singular_values: np.ndarray  # of the boundary-matching block
    boundary_set: tuple
    weight: float
    eps: float
    mu_pert: float
    seed: int | None

    def to_json(self) -> str:
        import json

        return json.dumps({
            "dimension": self.dimension,
            "decaying_dim": self.decaying_dim,
            "singular_values": [float(f"{s:.17g}") for s in self.singular_values],
            "boundary_set": list(self.boundary_set),
            "weight": self.weight,
            "eps": self.eps,
            "mu_pert": self.mu_pert,
            "seed": self.seed,
        }, sort_keys=True)


def perturbed_kernel_count(op: CylinderOperator, weight: float, boundary_set,
                           rank_threshold: float = 1e-6) -> KernelCount:
    """Dimension of weighted-decaying solutions of the (possibly perturbed)
    cylinder equation vanishing on the boundary index set at t = 0.

    The admissible far-end subspace (modes with lam_j < weight) is marched
    backward to t = 0 with periodic re-orthonormalization; the count is
    (subspace dim) - rank(rows of the boundary set), with singular values
    judged against rank_threshold * sigma_max.  For eps = 0 this reduces to
    #{j not in S : lam_j < weight}.
    """
    op.check_weight(weight)
    s_idx = np.asarray(sorted(int(i) for i in boundary_set), dtype=int)
    if s_idx.size and (s_idx.min() < 0 or s_idx.max() >= op.dim):
        raise ValueError("boundary set indices out of range")
    lams = op.base.eigenvalues
    cols = np.flatnonzero(lams < weight)
    p = int(cols.size)

    pert = op.perturbation
    eps = 0.0 if pert is None else pert.eps
    if pert is not None:
        gap = float(np.abs(lams - weight).min())
        if pert.eps >= 0.5 * gap:
            raise PerturbationTooLarge(
                f"eps = {pert.eps:.3g} is not small against the weight gap {gap:.3g}")

    if p == 0:
        return KernelCount(0, 0, np.zeros(0), tuple(s_idx.tolist()), float(weight),
                           eps, 0.0 if pert is None else pert.mu_pert,
                           None if pert is None else pert.seed)

    z = np.zeros((op.dim, p))
    z[cols, np.arange(p)] = 1.0
    if pert is not None:
        g = op.base.jmat @ pert.coupling

        def flow(t):
            return np.diag(lams) + (pert.eps * np.exp(pert.mu_pert * t)) * g

        t = op.tgrid
        h = op.step
        for k in range(t.size - 1, 0, -1):
            tk = t[k]
            k1 = flow(tk) @ z
            k2 = flow(tk - 0.5 * h) @ (z - 0.5 * h * k1)
            k3 = flow(tk - 0.5 * h) @ (z - 0.5 * h * k2)
            k4 = flow(tk - h) @ (z - h * k3)
            z = z - (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            if k % 10 == 0:
                z, _ = np.linalg.qr(z)
        z, _ = np.linalg.qr(z)
    # for eps = 0 the subspace is invariant: z at t=0 is the mode frame itself

    if s_idx.size == 0:
        rank = 0
        svals = np.zeros(0)
    else:
        block = z[s_idx, :]
        svals = np.linalg.svd(block, compute_uv=False)
        smax = float(svals.max(initial=0.0))
        if smax == 0.0:
            rank = 0
        else:
            thr = rank_threshold * smax
            kept = svals[svals >= thr]
            rank = int(kept.size)
            if kept.size and float(kept.min()) < 10.0 * thr:
                raise IllConditionedMatching(
                    f"smallest kept singular value {kept.min():.3e} is within 10x of "
                    f"the rank threshold {thr:.3e}")
    return KernelCount(p - rank, p, svals, tuple(s_idx.tolist()), float(weight),
                       eps, 0.0 if pert is None else pert.mu_pert,
                       None if pert is None else pert.seed)
