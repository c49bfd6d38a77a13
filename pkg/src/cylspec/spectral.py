"""Eigendecomposition of the composite A = J D and the derived root data.

The eigenvalues of A are the indicial roots of the translation-invariant
cylinder operator built on the model: e^{lam*t} nu solves the cylinder
equation exactly when A nu = lam nu.  Clusters of numerically coincident
eigenvalues carry the multiplicities d_lam that drive all index formulas.
"""

import csv
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceFailure, WindowExceedsCutoff
from .models import DiracModel


@dataclass(frozen=True)
class Cluster:
    lam: float
    dim: int
    start: int   # index range [start, stop) into the sorted eigenvalues
    stop: int


@dataclass(frozen=True)
class Spectrum:
    """Sorted spectrum of A = J D with gap-rule clusters.

    ``eigenvectors`` are M-orthonormal columns aligned with ``eigenvalues``;
    they (and ``jmat``, J expressed in the eigenbasis) are None for synthetic
    spectra built from root lists alone.
    """

    eigenvalues: np.ndarray
    clusters: tuple
    completeness_radius: float
    cluster_tol: float
    eigenvectors: np.ndarray | None = None
    mass: np.ndarray | None = None
    jmat: np.ndarray | None = None
    label: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return int(self.eigenvalues.size)

    @property
    def spectral_radius(self) -> float:
        return float(np.abs(self.eigenvalues).max()) if self.dim else 0.0

    def d0(self) -> int:
        """Multiplicity of the root at zero (0 when there is no zero cluster)."""
        for c in self.clusters:
            if abs(c.lam) <= max(self.cluster_tol, 1e-12):
                return c.dim
        return 0

    def roots(self) -> list[tuple[float, int]]:
        return [(c.lam, c.dim) for c in self.clusters]

    def cluster_at(self, lam: float, tol: float | None = None):
        tol = self.cluster_tol if tol is None else tol
        best = None
        for c in self.clusters:
            if abs(c.lam - lam) <= tol and (best is None or abs(c.lam - lam) < abs(best.lam - lam)):
                best = c
        return best

    def multiplicity_between(self, lo: float, hi: float) -> int:
        """Sum of d_lam over roots lam strictly inside (lo, hi)."""
        lams = [c.lam for c in self.clusters]
        a = bisect_right(lams, lo)
        b = bisect_left(lams, hi)
        return int(sum(self.clusters[i].dim for i in range(a, b)))

    def nearest_root(self, x: float) -> tuple[float, float]:
        lams = np.array([c.lam for c in self.clusters])
        i = int(np.argmin(np.abs(lams - x)))
        return float(lams[i]), float(abs(lams[i] - x))


def _cluster(eigs: np.ndarray, tol: float) -> tuple:
    clusters = []
    start = 0
    for i in range(1, eigs.size + 1):
        if i == eigs.size or eigs[i] - eigs[i - 1] > tol:
            block = eigs[start:i]
            lam = float(block.mean())
            if abs(lam) <= tol:
                lam = 0.0   # the kernel cluster is exactly the zero root
            clusters.append(Cluster(lam, int(block.size), start, i))
            start = i
    return tuple(clusters)


def eigendecompose(model: DiracModel, cluster_tol: float | None = None) -> Spectrum:
    """Full spectrum of A = J D with respect to the mass inner product.

    Dense symmetric solve on the mass-symmetrized operator; per-pair residual
    ||A v - lam v||_M must come out below 1e-8 or ConvergenceFailure is raised.
    Clusters merge eigenvalues closer than cluster_tol (default
    1e-6 * spectral radius).
    """
    a = model.composite()
    rt = np.sqrt(model.mass)
    sym = (a * rt[:, None]) / rt[None, :]
    sym = 0.5 * (sym + sym.T)
    try:
        vals, y = np.linalg.eigh(sym)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(f"dense eigensolver failed: {exc}") from exc
    vecs = y / rt[:, None]

    radius = float(np.abs(vals).max()) if vals.size else 0.0
    resid = np.abs(a @ vecs - vecs * vals[None, :])
    resid = float(np.sqrt((model.mass[:, None] * resid**2).sum(axis=0)).max())
    if resid > 1e-8 * max(1.0, radius):
        raise ConvergenceFailure(f"eigenpair residual {resid:.2e} exceeds 1e-8")

    if cluster_tol is None:
        cluster_tol = 1e-6 * max(radius, 1e-30)
    clusters = _cluster(vals, cluster_tol)
    jmat = vecs.T @ (model.mass[:, None] * (model.complex_structure @ vecs))
    return Spectrum(vals, clusters, model.completeness_radius, cluster_tol,
                    eigenvectors=vecs, mass=model.mass, jmat=jmat,
                    label=model.label, meta={"residual": resid})


def synthetic_spectrum(roots: list[tuple[float, int]], completeness_radius: float,
                       label: str = "synthetic") -> Spectrum:
    """Spectrum built from (root, multiplicity) pairs; no eigenvectors attached."""
    roots = sorted((float(l), int(d)) for l, d in roots)
    eigs = np.concatenate([np.full(d, l) for l, d in roots]) if roots else np.zeros(0)
    clusters = []
    start = 0
    for l, d in roots:
        clusters.append(Cluster(l, d, start, start + d))
        start += d
    radius = max((abs(l) for l, _ in roots), default=0.0)
    return Spectrum(eigs, tuple(clusters), float(completeness_radius),
                    cluster_tol=1e-6 * max(radius, 1e-30), label=label)


def indicial_roots(spectrum: Spectrum, window: tuple[float, float]) -> list[tuple[float, int]]:
    """Clusters (lam, d_lam) with lam in the closed window [lo, hi].

    Raises WindowExceedsCutoff when the window reaches beyond the model's
    completeness radius, where truncated models may silently miss roots.
    """
    lo, hi = float(window[0]), float(window[1])
    if not lo < hi:
        raise ValueError("window must satisfy lo < hi")
    r = spectrum.completeness_radius
    if max(abs(lo), abs(hi)) > r * (1 + 1e-12):
        raise WindowExceedsCutoff(
            f"window [{lo}, {hi}] exceeds completeness radius {r:.6g}")
    return [(c.lam, c.dim) for c in spectrum.clusters if lo <= c.lam <= hi]


def homogeneous_kernel(spectrum: Spectrum, lam: float) -> np.ndarray:
    """M-orthonormal basis of the lam-eigenspace of A (columns); empty when lam
    is not a root within the cluster tolerance."""
    if spectrum.eigenvectors is None:
        raise ValueError("spectrum carries no eigenvectors")
    c = spectrum.cluster_at(lam)
    if c is None:
        return np.zeros((spectrum.eigenvectors.shape[0], 0))
    return spectrum.eigenvectors[:, c.start:c.stop]


def principal_angle_gap(basis_a: np.ndarray, basis_b: np.ndarray,
                        mass: np.ndarray) -> float:
    """max |1 - cos(theta_i)| over principal angles between two M-orthonormal
    column spans; 0 means the subspaces coincide."""
    if basis_a.shape[1] != basis_b.shape[1]:
        return 1.0
    if basis_a.shape[1] == 0:
        return 0.0
    overlap = basis_a.T @ (mass[:, None] * basis_b)
    s = np.linalg.svd(overlap, compute_uv=False)
    return float(np.abs(1.0 - s).max())


def spectrum_to_csv(spectrum: Spectrum, path):
    """CSV columns: index, eigenvalue, cluster_id, cluster_lambda, d_lambda."""
    with open(path, "w", newline="", encoding="ascii") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "eigenvalue", "cluster_id", "cluster_lambda", "d_lambda"])
        for ci, c in enumerate(spectrum.clusters):
            for i in range(c.start, c.stop):
                w.writerow([i, f"{spectrum.eigenvalues[i]:.17g}", ci,
                            f"{c.lam:.17g}", c.dim])
