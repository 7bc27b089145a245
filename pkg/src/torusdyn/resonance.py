"""Resonance geometry for 3-dof kinetic Hamiltonians h(r) = (1/2)<A r, r>.

Resonance modules and adapted unimodular frames, resonance circles at
fixed energy, delta-strong double-resonance sets, averaged systems and
bifurcation scans along a resonance circle.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import gcd

import numpy as np
from scipy.interpolate import CubicSpline

from .systems import (
    ClassicalSystem,
    FourierPotential,
    ParametricPotential,
    QuadraticForm,
    as_potential_at,
)

__all__ = [
    "ResonanceModule",
    "AdaptedFrame",
    "ResonanceCircle",
    "StrongDoubleResonanceSet",
    "adapted_frame",
    "resonance_circle",
    "strong_double_resonances",
    "truncation_order",
    "averaged_system",
    "scan_bifurcations",
    "small_denominator_certificate",
    "hermite_column_form",
    "random_primitive_module",
]

# sum over all k in Z^3 \ {0} of 1 / max|k_i|^4: shells of size (2n+1)^3-(2n-1)^3
_LATTICE_SUM_FULL = 4.0 * np.pi**2 + np.pi**4 / 45.0  # 24 zeta(2) + 2 zeta(4)


def _primitive(v) -> bool:
    v = [int(x) for x in v]
    g = 0
    for x in v:
        g = gcd(g, abs(x))
    return g == 1


def hermite_column_form(mat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Column-style Hermite reduction: returns (H, U) with mat @ U = H, det U = +-1.

    H has its leading nonzero entries staircase-like from the right; only
    used here for small 3 x m integer matrices, exact arithmetic.
    """
    a = np.array(mat, dtype=object)
    n, m = a.shape
    u = np.eye(m, dtype=object)
    row = n - 1
    col = m - 1
    while row >= 0 and col >= 0:
        # find pivot column with nonzero entry in `row` among 0..col
        piv = None
        for j in range(col, -1, -1):
            if a[row, j] != 0:
                piv = j
                break
        if piv is None:
            row -= 1
            continue
        a[:, [piv, col]] = a[:, [col, piv]]
        u[:, [piv, col]] = u[:, [col, piv]]
        # clear the row entries to the left of col by gcd steps
        while any(a[row, j] != 0 for j in range(col)):
            for j in range(col):
                if a[row, j] == 0:
                    continue
                q = a[row, j] // a[row, col]
                a[:, j] -= q * a[:, col]
                u[:, j] -= q * u[:, col]
                if a[row, j] != 0:  # remainder smaller than pivot: swap in
                    a[:, [j, col]] = a[:, [col, j]]
                    u[:, [j, col]] = u[:, [col, j]]
        row -= 1
        col -= 1
    return a.astype(int), u.astype(int)


@dataclass(frozen=True)
class ResonanceModule:
    """Primitive submodule of Z^3 of rank 1 or 2, given by a basis."""

    basis: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        basis = tuple(tuple(int(x) for x in b) for b in self.basis)
        object.__setattr__(self, "basis", basis)
        if self.rank not in (1, 2):
            raise ValueError("module rank must be 1 or 2")
        b = np.array(basis, dtype=int)
        if self.rank == 1:
            if not _primitive(b[0]) or not any(b[0]):
                raise ValueError("rank-1 module needs a primitive nonzero generator")
        else:
            minors = [
                b[0, i] * b[1, j] - b[0, j] * b[1, i]
                for i in range(3)
                for j in range(i + 1, 3)
            ]
            if all(m == 0 for m in minors):
                raise ValueError("rank-2 basis is linearly dependent")
            if not _primitive(minors):
                raise ValueError("rank-2 module is not primitive")

    @property
    def rank(self) -> int:
        return len(self.basis)

    @classmethod
    def line(cls, k) -> "ResonanceModule":
        return cls((tuple(int(x) for x in k),))

    @classmethod
    def plane(cls, k1, k2) -> "ResonanceModule":
        return cls((tuple(int(x) for x in k1), tuple(int(x) for x in k2)))

    def matrix(self) -> np.ndarray:
        return np.array(self.basis, dtype=int).T  # 3 x rank, basis as columns

    def contains(self, k) -> bool:
        b = self.matrix()
        sol, res, *_ = np.linalg.lstsq(b.astype(float), np.asarray(k, float), rcond=None)
        if not np.allclose(b.astype(float) @ sol, np.asarray(k, float), atol=1e-9):
            return False
        return np.allclose(sol, np.round(sol), atol=1e-9)


@dataclass(frozen=True)
class AdaptedFrame:
    """Unimodular P whose last `rank` columns are a basis of the module."""

    P: np.ndarray
    module: ResonanceModule

    def __post_init__(self):
        p = np.array(self.P, dtype=int)
        p.setflags(write=False)
        object.__setattr__(self, "P", p)
        d = int(round(np.linalg.det(p.astype(float))))
        if d not in (-1, 1):
            raise ValueError("adapted frame must be unimodular")
        m = self.module.rank
        for j, b in enumerate(self.module.basis):
            if not np.array_equal(p[:, 3 - m + j], np.array(b)):
                raise ValueError("last columns of P must equal the module basis")

    @property
    def rank(self) -> int:
        return self.module.rank

    def transform_frequency(self, omega) -> np.ndarray:
        """Frequency in adapted coordinates: omega~ = P^T omega."""
        return self.P.T @ np.asarray(omega, dtype=float)

    def fast_block(self) -> np.ndarray:
        return self.P[:, : 3 - self.rank]

    def harmonic_map(self) -> np.ndarray:
        """Integer matrix sending a harmonic k to its adapted index P^{-1} k."""
        return np.round(np.linalg.inv(self.P.astype(float))).astype(int)


def _size_reduce(v: np.ndarray, against: list[np.ndarray]) -> np.ndarray:
    v = v.astype(int).copy()
    for _ in range(4):
        for w in against:
            denom = int(w @ w)
            if denom == 0:
                continue
            q = int(round(float(v @ w) / denom))
            v -= q * w
    return v


def adapted_frame(module: ResonanceModule) -> AdaptedFrame:
    """Unimodular completion of the module basis, smallest-norm reduced.

    Completion by Hermite-style column reduction; complement columns are
    size-reduced against the basis, ties broken lexicographically by the
    construction being deterministic.
    """
    b = module.matrix()  # 3 x m
    m = module.rank
    if m == 1:
        k = b[:, 0]
        # V k = e3 with V unimodular, then P = V^-1 has third column k
        h, u = hermite_column_form(k.reshape(1, 3))  # k @ U = (0, 0, g)
        g = int(h[0, 2])
        if abs(g) != 1:
            raise ValueError("generator is not primitive")
        if g == -1:
            u[:, 2] = -u[:, 2]
        v = u.T  # V k = (0, 0, 1)^T
        p = np.round(np.linalg.inv(v.astype(float))).astype(int)
        if not np.array_equal(p[:, 2], k):
            raise ValueError("frame completion failed")
        p[:, 0] = _size_reduce(p[:, 0], [k])
        p[:, 1] = _size_reduce(p[:, 1], [k, p[:, 0]])
    else:
        b1, b2 = b[:, 0], b[:, 1]
        n = np.cross(b1, b2)
        # solve u . n = 1 (n is primitive for a primitive module)
        u0 = _solve_unit_dot(n)
        u0 = _size_reduce(u0, [b1, b2])
        p = np.stack([u0, b1, b2], axis=1)
    det = int(round(np.linalg.det(p.astype(float))))
    if det not in (-1, 1):
        raise ValueError("frame completion failed")
    return AdaptedFrame(p, module)


def _complement_rank1(k: np.ndarray, which: int) -> np.ndarray:
    """Two integer vectors completing primitive k to a unimodular triple."""
    k = np.asarray(k, dtype=int)
    # Hermite on the 1x3 row: k @ u = (0, 0, 1); kernel columns complete the basis
    h, u = hermite_column_form(k.reshape(1, 3))
    # after reduction: k @ u[:, j] = h[0, j], h = (0, 0, +-1)
    g = h[0, 2]
    cols = [u[:, 0], u[:, 1]]
    if abs(g) != 1:
        raise ValueError("generator not primitive")
    return cols[which].astype(int)


def _solve_unit_dot(n: np.ndarray) -> np.ndarray:
    """Integer u with u . n = 1, for primitive n."""
    h, umat = hermite_column_form(np.asarray(n, dtype=int).reshape(1, 3))
    g = h[0, 2]
    if abs(g) != 1:
        raise ValueError("normal vector not primitive")
    return (umat[:, 2] * g).astype(int)


def random_primitive_module(rng: np.random.Generator, rank: int = 1,
                            span: int = 20) -> ResonanceModule:
    while True:
        if rank == 1:
            k = rng.integers(-span, span + 1, size=3)
            if any(k) and _primitive(k):
                return ResonanceModule.line(k)
        else:
            k1 = rng.integers(-span, span + 1, size=3)
            k2 = rng.integers(-span, span + 1, size=3)
            try:
                return ResonanceModule.plane(k1, k2)
            except ValueError:
                continue


# ---------------------------------------------------------------------------
# resonance circles


class ContinuationError(RuntimeError):
    def __init__(self, msg, partial=None):
        super().__init__(msg)
        self.partial = partial


@dataclass
class ResonanceCircle:
    """Closed loop {r : omega(r) . k = 0, h(r) = e} for quadratic h.

    Represented by arclength-like samples with periodic interpolation;
    `residual` certifies both defining equations on a dense resample.
    """

    kinetic: QuadraticForm
    module: ResonanceModule
    energy: float
    samples: np.ndarray = field(repr=False)

    def __post_init__(self):
        pts = np.asarray(self.samples, dtype=float)
        if not np.allclose(pts[0], pts[-1]):
            pts = np.vstack([pts, pts[0]])
        self.samples = pts
        t = np.linspace(0.0, 1.0, len(pts))
        self._spline = CubicSpline(t, pts, axis=0, bc_type="periodic")

    def point(self, phi: float) -> np.ndarray:
        return self._spline(np.mod(phi, 1.0))

    def points(self, phis) -> np.ndarray:
        return self._spline(np.mod(np.asarray(phis, float), 1.0))

    def residual(self, n: int = 1024) -> float:
        phis = np.linspace(0.0, 1.0, n, endpoint=False)
        pts = self.points(phis)
        a = self.kinetic.matrix
        k = np.array(self.module.basis[0], dtype=float)
        res_k = np.abs(pts @ (a @ k))
        res_e = np.abs(0.5 * np.einsum("ij,jk,ik->i", pts, a, pts) - self.energy)
        return float(max(res_k.max(), res_e.max()))

    def frequency(self, phi: float) -> np.ndarray:
        return self.kinetic.matrix @ self.point(phi)


def resonance_circle(kinetic: QuadraticForm, e: float, k, n_samples: int = 512,
                     tol: float = 1e-10) -> ResonanceCircle:
    """Resonance circle of a primitive k at energy e for h = (1/2)<A r, r>.

    The curve is the exact ellipse {<A k, r> = 0} cap {h = e}; each sample
    is Newton-polished on the two equations, the sample count is doubled
    until a dense resample certifies residuals below `tol`.
    """
    k = np.asarray(k, dtype=int)
    if not _primitive(k):
        raise ValueError("k must be primitive")
    if e <= 0:
        raise ValueError("energy must exceed min h = 0")
    a = QuadraticForm(3, np.asarray(kinetic.matrix)).matrix
    normal = a @ k.astype(float)
    # basis of the plane <A k, r> = 0, A-orthonormalized
    basis = [v for v in np.eye(3) if abs(v @ normal) < 0.9 * np.linalg.norm(normal)]
    v1 = basis[0] - (basis[0] @ normal) / (normal @ normal) * normal
    v2 = basis[1] - (basis[1] @ normal) / (normal @ normal) * normal
    # Gram-Schmidt in the A metric
    v1 = v1 / np.sqrt(v1 @ a @ v1)
    v2 = v2 - (v2 @ a @ v1) * v1
    v2 = v2 / np.sqrt(v2 @ a @ v2)
    circle = None
    while n_samples <= 8192:
        phis = np.linspace(0.0, 1.0, n_samples, endpoint=False)
        pts = np.sqrt(2.0 * e) * (
            np.cos(2 * np.pi * phis)[:, None] * v1[None, :]
            + np.sin(2 * np.pi * phis)[:, None] * v2[None, :]
        )
        # Newton polish each sample on (h - e, <A k, r>)
        for i, r in enumerate(pts):
            for _ in range(3):
                f = np.array([0.5 * r @ a @ r - e, r @ normal])
                jac = np.stack([a @ r, normal])
                step, *_ = np.linalg.lstsq(jac, f, rcond=None)
                r = r - step
            pts[i] = r
        circle = ResonanceCircle(QuadraticForm(3, a), ResonanceModule.line(k), e,
                                 np.vstack([pts, pts[0]]))
        if circle.residual(max(1024, 2 * n_samples)) <= tol:
            return circle
        n_samples *= 2
    raise ContinuationError(
        f"circle residual {circle.residual()} exceeds tol {tol}", partial=circle
    )


@dataclass
class StrongDoubleResonanceSet:
    """Points of a resonance circle where a second low-order resonance holds."""

    delta: float | None
    K: int
    points: list[tuple[np.ndarray, tuple[int, int]]]

    def __len__(self) -> int:
        return len(self.points)

    def locations(self) -> np.ndarray:
        return np.array([p for p, _ in self.points]).reshape(-1, 3)


def _half_ball(K: int) -> list[tuple[int, int]]:
    """Primitive-canonicalized representatives of B*(K) up to sign."""
    out = []
    seen = set()
    for k1 in range(-K, K + 1):
        for k2 in range(-K, K + 1):
            if (k1, k2) == (0, 0):
                continue
            if (k1, k2) in seen or (-k1, -k2) in seen:
                continue
            if k1 < 0 or (k1 == 0 and k2 < 0):
                k1, k2 = -k1, -k2
            seen.add((k1, k2))
            out.append((k1, k2))
    return sorted(out)


def strong_double_resonances(circle: ResonanceCircle, K: int,
                             frame: AdaptedFrame | None = None,
                             tol: float = 1e-9) -> StrongDoubleResonanceSet:
    """Solve k_hat . omega_hat(r) = 0 on the circle for every k_hat in B*(K).

    omega_hat is taken in an adapted frame for the circle's module; each
    nonzero k_hat contributes at most two points.  Points coinciding for
    different witnesses are reported once with the smallest-norm witness.
    """
    if frame is None:
        frame = adapted_frame(circle.module)
    a = circle.kinetic.matrix
    found: list[tuple[np.ndarray, tuple[int, int]]] = []
    for k_hat in _half_ball(K):
        # k_hat . omega_hat(r) = <A kfull, r> with kfull = P (k_hat, 0)
        kfull = frame.P @ np.array([k_hat[0], k_hat[1], 0])
        normal = a @ kfull.astype(float)
        # on the circle r(phi) = sqrt(2e)(cos w1 + sin w2): the function is
        # alpha cos(2 pi phi) + beta sin(2 pi phi): zeros are antipodal
        phis = np.linspace(0, 1, 1024, endpoint=False)
        vals = circle.points(phis) @ normal
        if np.max(np.abs(vals)) < tol:
            continue  # k_hat resonates identically: degenerate, skip
        roots = []
        for i in range(len(phis)):
            j = (i + 1) % len(phis)
            if vals[i] == 0.0:
                roots.append(phis[i])
            elif vals[i] * vals[j] < 0:
                lo, hi = phis[i], phis[i] + 1.0 / len(phis)
                for _ in range(60):
                    mid = 0.5 * (lo + hi)
                    vm = float(circle.point(mid) @ normal)
                    if vm == 0.0:
                        break
                    vlo = float(circle.point(lo) @ normal)
                    if vlo * vm < 0:
                        hi = mid
                    else:
                        lo = mid
                roots.append(0.5 * (lo + hi))
        for phi in roots:
            r = circle.point(phi)
            if abs(float(r @ normal)) > tol * max(1.0, float(np.linalg.norm(normal))):
                continue
            dup = False
            for p, _ in found:
                if np.linalg.norm(p - r) < 1e-7:
                    dup = True
                    break
            if not dup:
                found.append((r, k_hat))
    return StrongDoubleResonanceSet(None, K, found)


def truncation_order(f, delta: float, p: int = 2, M: float | None = None) -> tuple[int, float]:
    """Smallest K with the lattice tail bound below delta, plus the bound.

    The generic bound is sum over |k|_1 > K of M / ((2 pi)^4 max|k_i|^4).
    For a trigonometric polynomial the exact coefficient tail (zero beyond
    the support) is also used, so finite-support inputs return their
    support radius when that is smaller.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    if p < 2:
        raise ValueError("p must be at least 2")
    pot = f if isinstance(f, FourierPotential) else None
    if M is None:
        if pot is None:
            raise ValueError("M is required when f is not a trigonometric polynomial")
        # crude certified C^kappa-type constant from the coefficients
        M = sum(
            abs(c) * max(1.0, (2 * np.pi * np.sum(np.abs(k))) ** (p + 4))
            for k, c in pot.coefficients().items()
        )
        M = max(M, 1e-300)

    def lattice_tail(K: int) -> float:
        # exact: full sum minus the finite part over |k|_1 <= K
        finite = 0.0
        for k1 in range(-K, K + 1):
            for k2 in range(-K, K + 1):
                for k3 in range(-K, K + 1):
                    if (k1, k2, k3) == (0, 0, 0):
                        continue
                    if abs(k1) + abs(k2) + abs(k3) <= K:
                        finite += 1.0 / max(abs(k1), abs(k2), abs(k3)) ** 4
        return M / (2 * np.pi) ** 4 * (_LATTICE_SUM_FULL - finite)

    def exact_tail(K: int) -> float:
        if pot is None:
            return np.inf
        total = 0.0
        for k, c in pot.coefficients().items():
            if max(abs(x) for x in k) > K and any(k):
                total += abs(c) * max(1.0, (2 * np.pi * np.sum(np.abs(k))) ** p)
        return total

    K = 1
    while True:
        bound = min(lattice_tail(K), exact_tail(K))
        if bound <= delta:
            return K, float(bound)
        K += 1
        if K > 10_000:
            raise RuntimeError("tail bound did not drop below delta (check M)")


def averaged_system(kinetic: QuadraticForm, f, r0, module: ResonanceModule,
                    frame: AdaptedFrame | None = None, tol: float = 1e-9) -> ClassicalSystem:
    """M-averaged system at a resonant action r0, in adapted coordinates.

    Kinetic part: slow block of P^T A P.  Potential: harmonics of f lying
    in the module, relabelled by the module basis, coefficients evaluated
    at r0.  Requires omega(r0) orthogonal to the module.
    """
    if frame is None:
        frame = adapted_frame(module)
    if frame.module != module:
        raise ValueError("frame is not adapted to the module")
    a = kinetic.matrix
    r0 = np.asarray(r0, dtype=float)
    omega = a @ r0
    for b in module.basis:
        if abs(float(np.dot(b, omega))) > tol:
            raise ValueError(f"omega(r0) is not orthogonal to module generator {b}")
    m = module.rank
    at = frame.P.T @ a @ frame.P
    slow_kin = QuadraticForm(m, at[3 - m :, 3 - m :])
    pot = as_potential_at(f, r0)
    kmap = frame.harmonic_map()

    def to_slow(k):
        kt = kmap @ np.array(k, dtype=int)
        return kt

    coeffs: dict[tuple, complex] = {}
    for k, c in pot.coefficients().items():
        kt = to_slow(k)
        if any(kt[: 3 - m]):
            continue  # fast harmonic: averaged away
        key = tuple(int(x) for x in kt[3 - m :])
        coeffs[key] = coeffs.get(key, 0.0) + c
    return ClassicalSystem(slow_kin, FourierPotential(m, coeffs))


# ---------------------------------------------------------------------------
# bifurcation scan along a circle


class DegenerateMaximumError(RuntimeError):
    pass


def _local_maxima_1d(pot: FourierPotential, n_grid: int = 512,
                     curvature_tol: float = 1e-8) -> list[tuple[float, float, float]]:
    """(location, value, second derivative) of each local max of a 1-dof potential."""
    xs = np.linspace(0.0, 1.0, n_grid, endpoint=False)
    vals = pot(xs[:, None]).ravel() if pot.support else np.full(n_grid, pot.constant)
    out = []
    for i in range(n_grid):
        if vals[i] >= vals[i - 1] and vals[i] >= vals[(i + 1) % n_grid]:
            x = xs[i]
            for _ in range(50):  # Newton on U' = 0
                g = pot.gradient(np.array([x]))[0]
                h = pot.hessian(np.array([x]))[0, 0]
                if h == 0:
                    break
                x_new = x - g / h
                if abs(x_new - x) < 1e-15:
                    x = x_new
                    break
                x = x_new
            x = float(np.mod(x, 1.0))
            h = float(pot.hessian(np.array([x]))[0, 0])
            v = float(pot(np.array([x])))
            if h > -curvature_tol:
                raise DegenerateMaximumError(
                    f"local maximum at {x} has second derivative {h}"
                )
            if not any(abs(x - x0) < 1e-6 or abs(abs(x - x0) - 1) < 1e-6 for x0, _, _ in out):
                out.append((x, v, h))
    return out


@dataclass
class BifurcationScan:
    points: list[tuple[np.ndarray, float]]  # (circle point, crossing derivative)
    degenerate_flags: list[tuple[float, str]]  # (phi, reason)


def scan_bifurcations(kinetic: QuadraticForm, f, circle: ResonanceCircle,
                      grid: int = 256, frame: AdaptedFrame | None = None) -> BifurcationScan:
    """Crossings of the two largest local maxima of the slow potential.

    The s-averaged potential V(., r) is tracked along the circle; the two
    top local-maximum branches are matched by location between grid
    points; crossings of their values are refined by secant iteration and
    the transversal derivative is sign-certified by centered differences.
    """
    if frame is None:
        frame = adapted_frame(circle.module)
    phis = np.linspace(0.0, 1.0, grid, endpoint=False)
    flags: list[tuple[float, str]] = []

    def slow_potential(phi: float) -> FourierPotential:
        r = circle.point(phi)
        return averaged_system(kinetic, f, r, circle.module, frame).potential

    def top_two(phi: float):
        pot = slow_potential(phi)
        if not pot.support:
            raise DegenerateMaximumError("averaged potential is constant")
        maxima = _local_maxima_1d(pot)
        maxima.sort(key=lambda t: -t[1])
        return maxima

    gaps = np.empty(grid)
    tops = []
    for i, phi in enumerate(phis):
        try:
            maxima = top_two(phi)
        except DegenerateMaximumError as exc:
            flags.append((float(phi), str(exc)))
            gaps[i] = np.nan
            tops.append(None)
            continue
        tops.append(maxima)
        if len(maxima) < 2:
            gaps[i] = np.inf  # single maximum: no competitor
        else:
            gaps[i] = maxima[0][1] - maxima[1][1]

    points: list[tuple[np.ndarray, float]] = []
    # a crossing is where the identity of the largest branch flips; detect via
    # matching by location: sign of (value at branch A - value at branch B)
    for i in range(grid):
        j = (i + 1) % grid
        if tops[i] is None or tops[j] is None:
            continue
        if len(tops[i]) < 2 or len(tops[j]) < 2:
            continue
        # match branch: does the argmax location jump between i and j?
        xi, xj = tops[i][0][0], tops[j][0][0]
        dist = min(abs(xi - xj), 1 - abs(xi - xj))
        if dist < 0.25:
            continue  # same branch stays on top: no crossing in (phi_i, phi_j)

        def gap_signed(phi, ref_loc=xi):
            maxima = top_two(phi)
            ref = min(maxima, key=lambda t: min(abs(t[0] - ref_loc), 1 - abs(t[0] - ref_loc)))
            others = [t for t in maxima if t is not ref]
            if not others:
                return np.inf
            return ref[1] - max(o[1] for o in others)

        lo, hi = phis[i], phis[i] + 1.0 / grid
        flo = gap_signed(lo)
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            fm = gap_signed(mid)
            if flo * fm <= 0:
                hi = mid
            else:
                lo, flo = mid, fm
        phi_star = 0.5 * (lo + hi)
        h = 0.5 / grid
        deriv = (gap_signed(phi_star + h) - gap_signed(phi_star - h)) / (2 * h)
        if abs(deriv) < 1e-10:
            flags.append((float(phi_star), "crossing derivative vanishes"))
            continue
        points.append((circle.point(phi_star), float(deriv)))
    return BifurcationScan(points, flags)


def small_denominator_certificate(circle: ResonanceCircle, K: int, rho: float,
                                  exclude: np.ndarray | None = None,
                                  frame: AdaptedFrame | None = None,
                                  n: int = 4096) -> dict:
    """Minimum over B*(K) of |k_hat . omega_hat(r)| off rho-balls around `exclude`.

    Returns {"min": value, "argmin_phi": phi, "C0": value / rho}; the
    reported minimum certifies the small-denominator lower bound on the
    excised arcs at sample resolution.
    """
    if frame is None:
        frame = adapted_frame(circle.module)
    a = circle.kinetic.matrix
    phis = np.linspace(0.0, 1.0, n, endpoint=False)
    pts = circle.points(phis)
    mask = np.ones(n, dtype=bool)
    if exclude is not None and len(exclude):
        for q in np.atleast_2d(exclude):
            mask &= np.linalg.norm(pts - q[None, :], axis=1) >= rho
    best = np.inf
    arg = None
    for k_hat in _half_ball(K):
        kfull = frame.P @ np.array([k_hat[0], k_hat[1], 0])
        vals = np.abs(pts[mask] @ (a @ kfull.astype(float)))
        if vals.size == 0:
            continue
        i = int(np.argmin(vals))
        if vals[i] < best:
            best = float(vals[i])
            arg = float(phis[mask][i])
    return {"min": best, "argmin_phi": arg, "C0": best / rho if rho > 0 else np.inf}
