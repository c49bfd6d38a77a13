"""Finite-dimensional Dirac models: a mass inner product M, an operator D that
is M-self-adjoint, and a compatible complex structure J with

    J^2 = -1,   J^T M J = M,   D J = -J D.

All spectral content downstream lives in the M-self-adjoint composite A = J D.

Two constructions are provided.  The torus model acts on a truncated real
Fourier basis tensored with R^4, with D = I1 d/dtheta + I2 d/ds for the
quaternionic left multiplications I1, I2 and J = I3 = I1 I2; it satisfies
D^2 = (scalar Laplacian) x Id_4 exactly.  The block model acts on
(vertex functions) + (face functions) + (edge cochains) of a DEC complex,
realizing the operator

        [ 0    0    d* ]
    D = [ 0    0    *d ]       J = [[0, 1, 0], [-1, 0, 0], [0, 0, -*]]
        [ d   -*d   0  ]

with d* and *d the mass adjoints; D^2 equals the direct sum of the primal
0-form, dual 0-form and 1-form Laplacians exactly, by d o d = 0 alone.  On
self-dual quad-grid tori the dual 0-form Laplacian is entrywise the primal
one, so D^2 = L0 + L0 + L1 holds verbatim there.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sparse

from .dec import CochainComplex, laplacian0, laplacian0_dual, laplacian1
from .errors import ConvergenceFailure
from .lattice import FlatTorus, dual_lattice_points

# quaternion left multiplications by i, j, k on R^4 with basis (1, i, j, k)
I1 = np.array([[0., -1, 0, 0], [1, 0, 0, 0], [0, 0, 0, -1], [0, 0, 1, 0]])
I2 = np.array([[0., 0, -1, 0], [0, 0, 0, 1], [1, 0, 0, 0], [0, -1, 0, 0]])
I3 = I1 @ I2


@dataclass(frozen=True)
class DiracModel:
    label: str
    mass: np.ndarray                # (n,) positive diagonal
    dirac: np.ndarray               # (n, n)
    complex_structure: np.ndarray   # (n, n)
    completeness_radius: float
    fiber_dim: int | None = None
    area: float | None = None
    meta: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.dirac.shape[0]

    def composite(self) -> np.ndarray:
        """A = J D, the M-self-adjoint operator carrying the spectral data."""
        return self.complex_structure @ self.dirac


@dataclass(frozen=True)
class ModelDiagnostics:
    residuals: dict
    passed: bool

    def __str__(self):
        lines = [f"  {k:<22s} {v:.3e}" for k, v in self.residuals.items()]
        lines.append(f"  passed: {self.passed}")
        return "\n".join(lines)


def check_model(model: DiracModel,
                selfadjoint_tol: float = 1e-10,
                square_tol: float = 1e-12,
                orthogonal_tol: float = 1e-10,
                anticommute_tol: float = 1e-10) -> ModelDiagnostics:
    """Max-norm residuals of the model axioms with pass/fail at the stated tolerances."""
    m = model.mass[:, None]
    d, j = model.dirac, model.complex_structure
    md = m * d
    res = {
        "selfadjoint": float(np.abs(md - md.T).max()),
        "j_square": float(np.abs(j @ j + np.eye(model.dim)).max()),
        "j_orthogonal": float(np.abs(j.T @ (m * j) - np.diag(model.mass)).max()),
        "anticommute": float(np.abs(d @ j + j @ d).max()),
    }
    passed = (res["selfadjoint"] <= selfadjoint_tol
              and res["j_square"] <= square_tol
              and res["j_orthogonal"] <= orthogonal_tol
              and res["anticommute"] <= anticommute_tol)
    return ModelDiagnostics(res, passed)


# ---------------------------------------------------------------------------
# torus model

def build_torus_model(torus: FlatTorus, cutoff: float) -> DiracModel:
    """Quaternionic model on a flat torus, truncated to modes |k|^2 <= cutoff.

    Basis layout: 4 components for the constant mode, then per antipodal mode
    pair an 8-dim block (cos x R^4, sin x R^4).  The composite A = J D has
    eigenvalues {+-|k|} with the zero mode contributing a 4-dim kernel.
    """
    modes = dual_lattice_points(torus, cutoff)   # first row is k = 0
    npairs = modes.shape[0] - 1
    dim = 4 + 8 * npairs
    area = torus.area

    d = np.zeros((dim, dim))
    jmat = np.zeros((dim, dim))
    mass = np.empty(dim)
    jmat[:4, :4] = I3
    mass[:4] = area
    for p in range(npairs):
        k = modes[1 + p]
        kmat = k[0] * I1 + k[1] * I2
        c = 4 + 8 * p          # cos block start; sin block at c + 4
        d[c:c + 4, c + 4:c + 8] = kmat
        d[c + 4:c + 8, c:c + 4] = -kmat
        jmat[c:c + 4, c:c + 4] = I3
        jmat[c + 4:c + 8, c + 4:c + 8] = I3
        mass[c:c + 8] = 0.5 * area

    meta = {"modes": modes, "cutoff": float(cutoff)}
    return DiracModel("torus", mass, d, jmat, completeness_radius=float(np.sqrt(cutoff)),
                      fiber_dim=4, area=area, meta=meta)


def torus_kernel_fiber_basis() -> np.ndarray:
    """The standard constant-section basis of the torus-model kernel (fiber R^4)."""
    return np.eye(4)


# ---------------------------------------------------------------------------
# block model on a DEC complex

def _mass_eigh(stiff: np.ndarray, mass: np.ndarray):
    """Eigenpairs of the mass-symmetric pencil: stiff v = lam * diag(mass) v."""
    rt = np.sqrt(mass)
    sym = stiff / rt[:, None] / rt[None, :]
    sym = 0.5 * (sym + sym.T)
    try:
        vals, y = np.linalg.eigh(sym)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(f"dense eigensolver failed: {exc}") from exc
    return vals, y / rt[:, None]


def _face_cycle_rotation(cc: CochainComplex) -> np.ndarray:
    """Combinatorial quarter-turn candidate on 1-cochains: within every face,
    each directed boundary side feeds the next one along the cycle.  Only its
    compression to the harmonic subspace is used; polar correction makes that
    an exact anti-involution."""
    n1 = cc.n1
    rot = np.zeros((n1, n1))
    d0 = cc.d0.tocoo()
    tail = np.zeros(n1, dtype=int)
    head = np.zeros(n1, dtype=int)
    for e, v, s in zip(d0.row, d0.col, d0.data):
        if s < 0:
            tail[e] = v
        else:
            head[e] = v
    d1 = cc.d1.tocoo()
    by_face: dict[int, list[tuple[int, int]]] = {}
    for f, e, s in zip(d1.row, d1.col, d1.data):
        by_face.setdefault(int(f), []).append((int(e), int(s)))
    for sides in by_face.values():
        start = {}
        for e, s in sides:
            u = tail[e] if s > 0 else head[e]
            if int(u) in start:
                start = {}
                break
            start[int(u)] = (e, s)
        if not start:
            # repeated boundary vertex: give up on this face's contribution
            continue
        for e, s in sides:
            v = head[e] if s > 0 else tail[e]    # endpoint of the directed side
            e2, s2 = start[int(v)]
            rot[e2, e] += 0.25 * s * s2
    return rot


def _harmonic_complex_structure(harm: np.ndarray, mass1: np.ndarray,
                                cc: CochainComplex) -> tuple[np.ndarray, float]:
    """M-orthogonal anti-involution on the harmonic space, as the polar
    correction of the compressed quarter-turn candidate; returns (J_H in
    harmonic coordinates, correction magnitude)."""
    dim = harm.shape[1]
    if dim == 0:
        return np.zeros((0, 0)), 0.0
    cand = harm.T @ (mass1[:, None] * (_face_cycle_rotation(cc) @ harm))
    skew = 0.5 * (cand - cand.T)
    u, sv, vt = np.linalg.svd(skew)
    if sv.min() <= 1e-8 * max(sv.max(), 1e-30):
        # candidate degenerate on this mesh: fall back to pairing consecutive
        # basis vectors, still an exact M-orthogonal anti-involution
        jh = np.zeros((dim, dim))
        for a in range(0, dim - 1, 2):
            jh[a, a + 1] = -1.0
            jh[a + 1, a] = 1.0
        return jh, float(np.abs(cand - jh).max())
    jh = u @ vt   # orthogonal polar factor of a skew matrix: orthogonal and skew
    jh = 0.5 * (jh - jh.T)
    return jh, float(np.abs(cand - jh).max())


def _grid_harmonics(cc: CochainComplex) -> np.ndarray:
    """Constant horizontal / vertical cochains of a quad-grid torus (exactly harmonic)."""
    n, m = cc.meta["shape"]
    nm = n * m
    h = np.zeros((cc.n1, 2))
    h[:nm, 0] = 1.0
    h[nm:, 1] = 1.0
    return h


def _harmonic_basis(cc: CochainComplex) -> np.ndarray:
    """M1-orthonormal basis of harmonic 1-cochains."""
    if cc.meta.get("kind") == "quad-grid-torus":
        h = _grid_harmonics(cc)
    else:
        lap1 = laplacian1(cc)
        stiff = (sparse.diags(cc.star1) @ lap1.matrix).toarray()
        stiff = 0.5 * (stiff + stiff.T)
        vals, vecs = _mass_eigh(stiff, cc.star1)
        twog = 2 * cc.genus
        h = vecs[:, :twog]
        gap = vals[twog] if stiff.shape[0] > twog else np.inf
        if twog > 0 and vals[twog - 1] > 1e-8 * max(gap, 1e-30):
            raise ConvergenceFailure("harmonic subspace is not numerically separated")
    # M1-orthonormalize
    g = h.T @ (cc.star1[:, None] * h)
    low = np.linalg.cholesky(g)
    return h @ np.linalg.inv(low).T


def build_sl_model(cc: CochainComplex) -> DiracModel:
    """Block Dirac model on (vertex functions) + (face functions) + (1-cochains).

    D is assembled from d0, d1 and the mass operators; D^2 equals the direct
    sum of the primal 0-form, dual 0-form and 1-form Laplacians exactly.  J is
    assembled spectrally: the function constants are paired with each other,
    harmonic cochains carry the polar-corrected quarter-turn, and each
    eigenvector pair (+s, -s) of D is rotated into its chirality partner.
    The kernel has dimension 1 + 1 + 2*genus.
    """
    n0, n1, n2 = cc.n0, cc.n1, cc.n2
    m0, m1 = cc.star0, cc.star1
    m2d = 1.0 / cc.star2                       # mass of face functions
    dim = n0 + n2 + n1
    s0, s1, s2 = slice(0, n0), slice(n0, n0 + n2), slice(n0 + n2, dim)

    d0 = cc.d0.toarray().astype(float)
    d1 = cc.d1.toarray().astype(float)
    delta = (d0.T * m1[None, :]) / m0[:, None]          # M0^{-1} d0^T M1
    t_up = d1 * cc.star2[:, None]                       # star2 d1
    t_up_adj = d1.T / m1[:, None]                       # M1^{-1} d1^T

    d = np.zeros((dim, dim))
    d[s0, s2] = delta
    d[s1, s2] = t_up
    d[s2, s0] = d0
    d[s2, s1] = t_up_adj
    mass = np.concatenate([m0, m2d, m1])

    # spectral data of the two function Laplacians
    vals0, vecs0 = _mass_eigh((d0.T * m1[None, :]) @ d0, m0)
    vals2, vecs2 = _mass_eigh((d1 / m1[None, :]) @ d1.T, m2d)
    tol0 = 1e-8 * max(vals0.max(), 1.0)
    tol2 = 1e-8 * max(vals2.max(), 1.0)
    if np.count_nonzero(vals0 < tol0) != 1 or np.count_nonzero(vals2 < tol2) != 1:
        raise ConvergenceFailure("complex is not connected (multi-dimensional constants)")

    area = float(m0.sum())
    area_dual = float(m2d.sum())
    kf = np.zeros(dim)
    kf[s0] = 1.0 / np.sqrt(area)
    kg = np.zeros(dim)
    kg[s1] = 1.0 / np.sqrt(area_dual)

    harm = _harmonic_basis(cc)
    jh, jh_correction = _harmonic_complex_structure(harm, m1, cc)

    # paired +s / -s eigenvectors of D:  u_+- = (v, 0, +-e)/sqrt2, e = d0 v / s
    mu = vals0[1:]
    v0 = vecs0[:, 1:]
    e_vec = (d0 @ v0) / np.sqrt(mu)[None, :]
    nu = vals2[1:]
    w0 = vecs2[:, 1:]
    c_vec = (d1.T @ w0) / m1[:, None] / np.sqrt(nu)[None, :]

    k_plus = v0.shape[1] + w0.shape[1]
    b_plus = np.zeros((dim, k_plus))
    b_minus = np.zeros((dim, k_plus))
    r = 1.0 / np.sqrt(2.0)
    b_plus[s0, :v0.shape[1]] = r * v0
    b_plus[s2, :v0.shape[1]] = r * e_vec
    b_minus[s0, :v0.shape[1]] = r * v0
    b_minus[s2, :v0.shape[1]] = -r * e_vec
    b_plus[s1, v0.shape[1]:] = r * w0
    b_plus[s2, v0.shape[1]:] = r * c_vec
    b_minus[s1, v0.shape[1]:] = r * w0
    b_minus[s2, v0.shape[1]:] = -r * c_vec

    # J u_+ = u_-, J u_- = -u_+; J kf = -kg, J kg = kf; J|harmonic = -J_H
    jmat = b_minus @ (b_plus * mass[:, None]).T - b_plus @ (b_minus * mass[:, None]).T
    jmat -= np.outer(kg, kf * mass) - np.outer(kf, kg * mass)
    hfull = np.zeros((dim, harm.shape[1]))
    hfull[s2] = harm
    jmat += hfull @ (-jh) @ (hfull * mass[:, None]).T

    radius = float(np.sqrt(max(vals0.max(), vals2.max())))
    meta = {
        "kind": "dec-block",
        "blocks": (n0, n2, n1),
        "genus": cc.genus,
        "harmonic_correction": jh_correction,
        "self_dual": bool(cc.meta.get("self_dual", False)),
        "complex_meta": dict(cc.meta),
    }
    return DiracModel("sl-block", mass, d, jmat, completeness_radius=radius,
                      fiber_dim=None, area=area, meta=meta)


def sl_laplacian_blocks(cc: CochainComplex) -> np.ndarray:
    """Dense direct sum L0 + L0_dual + L1; the exact square of the block model."""
    l0 = laplacian0(cc).toarray()
    l0d = laplacian0_dual(cc).toarray()
    l1 = laplacian1(cc).toarray()
    n0, n2, n1 = l0.shape[0], l0d.shape[0], l1.shape[0]
    out = np.zeros((n0 + n2 + n1, n0 + n2 + n1))
    out[:n0, :n0] = l0
    out[n0:n0 + n2, n0:n0 + n2] = l0d
    out[n0 + n2:, n0 + n2:] = l1
    return out


# ---------------------------------------------------------------------------
# export

def export_model_json(model: DiracModel, path, eigendata_path=None):
    import json

    record = {"label": model.label, "dim": model.dim,
              "eigendata_path": str(eigendata_path) if eigendata_path else None}
    with open(path, "w", encoding="ascii") as fh:
        json.dump(record, fh, sort_keys=True, indent=1)
        fh.write("\n")


def operator_to_csv(matrix: np.ndarray, path):
    np.savetxt(path, np.asarray(matrix), delimiter=",", fmt="%.17g")
