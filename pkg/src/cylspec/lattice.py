"""Flat two-dimensional tori and their scalar Laplacian spectra.

A flat torus is R^2 / L for a rank-2 lattice L.  Everything here is exact
Fourier analysis: eigenvalues of the 0-form Laplacian are |k|^2 over the
dual lattice k = 2*pi*(B^T)^{-1} n, n in Z^2.  Real multiplicities are 1
for the constant mode and 2 per antipodal pair {k, -k}.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateLattice

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class FlatTorus:
    """Flat torus R^2 / (B Z^2); columns of ``basis`` are the lattice generators."""

    basis: np.ndarray
    dual_basis: np.ndarray = field(init=False)

    def __post_init__(self):
        b = np.asarray(self.basis, dtype=float).reshape(2, 2)
        det = b[0, 0] * b[1, 1] - b[0, 1] * b[1, 0]
        if abs(det) < 1e-12 * max(1.0, float(np.abs(b).max()) ** 2):
            raise DegenerateLattice(f"lattice basis is singular (det={det:.3e})")
        dual = TWO_PI * np.linalg.inv(b.T)
        object.__setattr__(self, "basis", b)
        object.__setattr__(self, "dual_basis", dual)

    @property
    def area(self) -> float:
        return abs(float(np.linalg.det(self.basis)))


def square_torus(side: float = TWO_PI) -> FlatTorus:
    return FlatTorus(np.diag([side, side]))


def dual_lattice_points(torus: FlatTorus, cutoff: float) -> np.ndarray:
    """All dual lattice vectors k with |k|^2 <= cutoff (closed ball), k=0 included.

    Exactly one representative per antipodal pair is returned, with k=0 first;
    pairs are ordered by |k|^2 then lexicographically, so the output is
    deterministic.
    """
    if cutoff <= 0:
        raise ValueError("cutoff must be positive")
    dual = torus.dual_basis
    smin = np.linalg.svd(dual, compute_uv=False)[-1]
    if smin <= 0:
        raise DegenerateLattice("dual lattice is rank deficient")
    nmax = int(np.ceil(np.sqrt(cutoff) / smin)) + 1
    reps = []
    for n1 in range(-nmax, nmax + 1):
        for n2 in range(-nmax, nmax + 1):
            if (n1, n2) == (0, 0):
                continue
            # keep one representative of {n, -n}
            if n1 < 0 or (n1 == 0 and n2 < 0):
                continue
            k = dual @ (n1, n2)
            if float(k @ k) <= cutoff:
                reps.append(k)
    reps.sort(key=lambda k: (float(k @ k), k[0], k[1]))
    return np.vstack([np.zeros((1, 2))] + [r.reshape(1, 2) for r in reps])


def torus_fourier_spectrum(torus: FlatTorus, cutoff: float) -> list[tuple[float, int]]:
    """Laplace eigenvalues |k|^2 <= cutoff with real multiplicities, ascending.

    Multiplicity counts real eigenfunctions: 1 for k=0, else 2 per antipodal
    pair (cos and sin).  Distinct lattice points with equal |k|^2 are merged.
    """
    pts = dual_lattice_points(torus, cutoff)
    eigs = np.einsum("ij,ij->i", pts, pts)
    out: list[tuple[float, int]] = [(0.0, 1)]
    tol = 1e-9 * max(1.0, cutoff)
    for ev in np.sort(eigs[1:]):
        ev = float(ev)
        if out and out[-1][0] > 0 and abs(ev - out[-1][0]) <= tol:
            out[-1] = (out[-1][0], out[-1][1] + 2)
        else:
            out.append((ev, 2))
    return out
