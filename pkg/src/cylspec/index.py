"""Weight combinatorics on cylindrical ends.

For a rate vector mu in R^m (one exponential weight per end), the weighted
model operator is Fredholm exactly when no component is an indicial root of
its end.  Within that complement the index is the integer

    Ind(mu) = sum_{mu_i >= 0} ( d_{0,i}/2 + sum_{z in (0, mu_i)} d_z )
            - sum_{mu_i < 0}  ( d_{0,i}/2 + sum_{z in (mu_i, 0)} d_z )

and crossing a root z changes it by exactly d_z.  The two virtual-dimension
conventions are the all-negative-rate index (fixed cross-section, always
<= 0) and sum d_{0,i}/2 (varying cross-section, always >= 0).  The kernel at
rate zero carries a symplectic pairing; subspaces produced by asymptotic
limits are tested against it for the Lagrangian property.
"""

import json
from dataclasses import dataclass

import numpy as np

from .errors import (CriticalRate, NonNegativeRate, NotInKernel, NotOrdered,
                     OddKernelDimension, WindowExceedsCutoff)
from .spectral import Spectrum

FIXED_TAG = "fixed-cross-section-index"
VARYING_TAG = "varying-cross-section-index"
WEIGHTED_TAG = "weighted-end-sum"


@dataclass(frozen=True)
class EndSystem:
    """Spectral data of the m ends of a cylindrical model."""

    ends: tuple

    def __post_init__(self):
        if len(self.ends) < 1:
            raise ValueError("need at least one end")
        object.__setattr__(self, "ends", tuple(self.ends))

    @property
    def m(self) -> int:
        return len(self.ends)

    def criticality_tol(self, i: int) -> float:
        return 1e-8 * max(self.ends[i].spectral_radius, 1e-30)


@dataclass(frozen=True)
class RateVector:
    rates: tuple

    def __post_init__(self):
        object.__setattr__(self, "rates", tuple(float(r) for r in self.rates))

    def __len__(self):
        return len(self.rates)


def _as_rates(rate, m: int) -> RateVector:
    if isinstance(rate, RateVector):
        rv = rate
    elif np.isscalar(rate):
        rv = RateVector((float(rate),))
    else:
        rv = RateVector(tuple(rate))
    if len(rv) != m:
        raise ValueError(f"rate vector has {len(rv)} components, system has {m} ends")
    return rv


@dataclass(frozen=True)
class PerEndContribution:
    end_id: int
    rate: float
    contribution: int
    crossed_roots: tuple   # roots strictly between 0 and the rate, with multiplicities


@dataclass(frozen=True)
class IndexReport:
    rate: RateVector
    index: int
    per_end: tuple
    formula_tag: str

    def __post_init__(self):
        if self.index != sum(p.contribution for p in self.per_end):
            raise ValueError("per-end contributions do not sum to the index")

    def to_json(self) -> str:
        obj = {
            "rates": list(self.rate.rates),
            "index": self.index,
            "per_end": [
                {"end_id": p.end_id, "rate": p.rate, "contribution": p.contribution,
                 "crossed_roots": [{"lambda": l, "d": d} for l, d in p.crossed_roots]}
                for p in self.per_end
            ],
            "formula_tag": self.formula_tag,
        }
        return json.dumps(obj, sort_keys=True)

    def table(self) -> str:
        lines = [f"index = {self.index}   [{self.formula_tag}]"]
        for p in self.per_end:
            roots = ", ".join(f"{l:.6g} (d={d})" for l, d in p.crossed_roots) or "-"
            lines.append(f"  end {p.end_id}: rate {p.rate:.6g}  "
                         f"contribution {p.contribution:+d}  interior roots: {roots}")
        return "\n".join(lines)


def _check_radius(rate: RateVector, ends: EndSystem):
    for i, r in enumerate(rate.rates):
        radius = ends.ends[i].completeness_radius
        if abs(r) > radius * (1 + 1e-12):
            raise WindowExceedsCutoff(
                f"end {i}: |rate| = {abs(r):.6g} exceeds completeness radius {radius:.6g}")


def is_critical(rate, ends: EndSystem, tol: float | None = None) -> list[bool]:
    """Per-end test: is rate_i within tol of that end's root set?"""
    rv = _as_rates(rate, ends.m)
    _check_radius(rv, ends)
    out = []
    for i, r in enumerate(rv.rates):
        t = ends.criticality_tol(i) if tol is None else tol
        _, dist = ends.ends[i].nearest_root(r)
        out.append(bool(dist <= t))
    return out


def _require_noncritical(rv: RateVector, ends: EndSystem, tol: float | None = None):
    flags = is_critical(rv, ends, tol)
    if any(flags):
        i = flags.index(True)
        root, dist = ends.ends[i].nearest_root(rv.rates[i])
        raise CriticalRate(
            f"end {i}: rate {rv.rates[i]:.6g} is within {dist:.3e} of root {root:.6g}")


def _interior_roots(spec: Spectrum, rate: float) -> list[tuple[float, int]]:
    lo, hi = (0.0, rate) if rate >= 0 else (rate, 0.0)
    out = []
    for c in spec.clusters:
        if lo < c.lam < hi and c.dim > 0:
            out.append((c.lam, c.dim))
    return out


def fredholm_index(rate, ends: EndSystem, tol: float | None = None) -> IndexReport:
    """Index of the weighted model operator at a non-critical rate vector.

    Per-end contribution: +(d_0/2 + interior multiplicities) for positive
    rates, the mirror-negative for negative rates.
    """
    rv = _as_rates(rate, ends.m)
    _require_noncritical(rv, ends, tol)
    per_end = []
    for i, r in enumerate(rv.rates):
        spec = ends.ends[i]
        d0 = spec.d0()
        if d0 % 2 != 0:
            raise OddKernelDimension(f"end {i}: d_0 = {d0} is odd")
        crossed = _interior_roots(spec, r)
        interior = sum(d for _, d in crossed)
        contribution = d0 // 2 + interior
        if r < 0:
            contribution = -contribution
        per_end.append(PerEndContribution(i, r, contribution, tuple(crossed)))
    total = sum(p.contribution for p in per_end)
    return IndexReport(rv, total, tuple(per_end), WEIGHTED_TAG)


def wall_crossing(rate1, rate2, ends: EndSystem,
                  tol: float | None = None) -> tuple[int, list]:
    """Jump of the index between two componentwise-ordered non-critical rates.

    Returns (jump, crossed) where crossed lists, per end, the roots strictly
    between the rates with their multiplicities.  The jump is cross-checked
    against the difference of the two index evaluations.
    """
    rv1 = _as_rates(rate1, ends.m)
    rv2 = _as_rates(rate2, ends.m)
    if not all(a < b for a, b in zip(rv1.rates, rv2.rates)):
        raise NotOrdered("need rate1 < rate2 componentwise")
    _require_noncritical(rv1, ends, tol)
    _require_noncritical(rv2, ends, tol)
    crossed = []
    jump = 0
    for i in range(ends.m):
        roots = [(c.lam, c.dim) for c in ends.ends[i].clusters
                 if rv1.rates[i] < c.lam < rv2.rates[i]]
        crossed.append(roots)
        jump += sum(d for _, d in roots)
    diff = fredholm_index(rv2, ends, tol).index - fredholm_index(rv1, ends, tol).index
    if diff != jump:
        raise AssertionError(f"wall-crossing mismatch: index diff {diff} != jump {jump}")
    return jump, crossed


def fixed_moduli_vdim(rate, ends: EndSystem, tol: float | None = None) -> int:
    """Virtual dimension at fixed asymptotic cross-section and negative rate:
    -(sum d_{0,i}/2) - (sum of multiplicities in (mu_i, 0)); always <= 0."""
    rv = _as_rates(rate, ends.m)
    if any(r >= 0 for r in rv.rates):
        raise NonNegativeRate("fixed-asymptotics rates must be negative in every component")
    report = fredholm_index(rv, ends, tol)
    value = 0
    for i, r in enumerate(rv.rates):
        spec = ends.ends[i]
        value -= spec.d0() // 2
        value -= spec.multiplicity_between(r, 0.0)
    if value != report.index:
        raise AssertionError("fixed-rate formula disagrees with the index evaluation")
    return value


def varying_moduli_vdim(ends: EndSystem) -> int:
    """Virtual dimension with varying cross-section: sum of d_{0,i}/2; >= 0."""
    total = 0
    for i, spec in enumerate(ends.ends):
        d0 = spec.d0()
        if d0 % 2 != 0:
            raise OddKernelDimension(f"end {i}: d_0 = {d0} is odd")
        total += d0 // 2
    return total


def stratum_vdim(stratum_dim: int, end: Spectrum) -> int:
    """Index restricted to a stratum of cross-sections: stratum_dim - d_0/2."""
    if stratum_dim < 0:
        raise ValueError("stratum dimension must be >= 0")
    d0 = end.d0()
    if d0 % 2 != 0:
        raise OddKernelDimension(f"d_0 = {d0} is odd")
    return int(stratum_dim) - d0 // 2


# ---------------------------------------------------------------------------
# symplectic pairing on the zero-rate kernel

@dataclass(frozen=True)
class SymplecticKernel:
    """Kernel basis with the integrated skew pairing Omega = area * fiber form."""

    basis: np.ndarray        # (f, K) columns: constant-section fiber vectors
    gram: np.ndarray         # (K, K) skew
    area_weight: float
    form: np.ndarray         # (f, f) = area * pointwise pairing

    @property
    def kernel_dim(self) -> int:
        return self.basis.shape[1]


def symplectic_form(basis, pairing, area: float, kernel=None,
                    tol: float = 1e-8) -> SymplecticKernel:
    """Integrate a pointwise skew pairing over constant sections.

    For constant sections the integral over the surface collapses to
    area * pairing(xi_a, xi_b).  When ``kernel`` (an orthonormal basis of the
    admissible fiber subspace) is supplied, every column of ``basis`` must lie
    in its span or NotInKernel is raised.
    """
    basis = np.asarray(basis, dtype=float)
    pairing = np.asarray(pairing, dtype=float)
    if float(np.abs(pairing + pairing.T).max()) > 1e-10 * max(1.0, float(np.abs(pairing).max())):
        raise ValueError("pairing is not skew")
    if kernel is not None:
        kernel = np.asarray(kernel, dtype=float)
        proj = kernel @ (kernel.T @ basis)
        if float(np.abs(basis - proj).max()) > tol * max(1.0, float(np.abs(basis).max())):
            raise NotInKernel("basis vectors do not lie in the zero-rate kernel")
    form = float(area) * pairing
    gram = basis.T @ form @ basis
    return SymplecticKernel(basis, gram, float(area), form)


def is_lagrangian(subspace, sk: SymplecticKernel, tol: float = 1e-9) -> bool:
    """True iff the subspace is isotropic for Omega and has half the kernel dimension."""
    if sk.kernel_dim % 2 != 0:
        raise OddKernelDimension(f"kernel dimension {sk.kernel_dim} is odd")
    s = np.asarray(subspace, dtype=float)
    if s.ndim == 1:
        s = s[:, None]
    if np.linalg.matrix_rank(s) != s.shape[1]:
        raise ValueError("subspace basis is linearly dependent")
    if s.shape[1] != sk.kernel_dim // 2:
        return False
    restricted = s.T @ sk.form @ s
    return bool(np.abs(restricted).max() <= tol * max(1.0, abs(sk.area_weight)))
