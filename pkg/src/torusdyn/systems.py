"""Phase-space types for classical systems on T^m x R^m.

A classical system is a Hamiltonian of the form

    C(theta, r) = (1/2) T(r) + U(theta)

where T is a positive definite quadratic form on R^m (acting on the
momenta r) and U is a real trigonometric polynomial on the m-torus.
Angles live in [0, 1) with frequency convention exp(2*pi*i*k.theta).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

import numpy as np

__all__ = [
    "QuadraticForm",
    "FourierPotential",
    "ParametricPotential",
    "ClassicalSystem",
    "PhaseState",
    "Trajectory",
    "DimensionMismatchError",
    "system_to_text",
    "system_from_text",
    "trajectory_to_csv",
]

TWO_PI = 2.0 * np.pi


class DimensionMismatchError(ValueError):
    pass


def _as_key(k) -> tuple:
    return tuple(int(x) for x in np.asarray(k, dtype=int).ravel())


@dataclass(frozen=True)
class QuadraticForm:
    """Positive definite quadratic form T(r) = <A r, r> on R^dim."""

    dim: int
    matrix: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.matrix, dtype=float).reshape(self.dim, self.dim)
        if not np.allclose(a, a.T, atol=1e-12):
            raise ValueError("quadratic form matrix must be symmetric")
        if np.min(np.linalg.eigvalsh(a)) <= 0.0:
            raise ValueError("quadratic form must be positive definite")
        a = 0.5 * (a + a.T)
        a.setflags(write=False)
        object.__setattr__(self, "matrix", a)

    @classmethod
    def identity(cls, dim: int) -> "QuadraticForm":
        return cls(dim, np.eye(dim))

    def __call__(self, r) -> float:
        r = np.asarray(r, dtype=float)
        return float(r @ self.matrix @ r)

    def dual(self) -> "QuadraticForm":
        """Form with the inverse matrix; the norm on velocities dual to T."""
        return QuadraticForm(self.dim, np.linalg.inv(self.matrix))

    def dual_norm(self, v) -> float:
        v = np.asarray(v, dtype=float)
        return float(np.sqrt(v @ np.linalg.solve(self.matrix, v)))


class FourierPotential:
    """Real trigonometric polynomial U(theta) = sum_k c_k e^{2 pi i k.theta}.

    Coefficients are stored over the half lattice (first nonzero component
    positive); Hermitian symmetry c_{-k} = conj(c_k) is implied, so values
    are real.  Supports +, scalar *, evaluation, gradient, Hessian and
    harmonic filtering.
    """

    def __init__(self, dim: int, coefficients: Mapping[tuple, complex]):
        self.dim = int(dim)
        full: dict[tuple, complex] = {}
        for k, c in coefficients.items():
            k = _as_key(k)
            if len(k) != self.dim:
                raise DimensionMismatchError(
                    f"frequency {k} has wrong dimension (expected {self.dim})"
                )
            full[k] = full.get(k, 0.0) + complex(c)
        const = 0.0
        half: dict[tuple, complex] = {}
        for k, c in full.items():
            if all(x == 0 for x in k):
                if abs(c.imag) > 1e-12 * max(1.0, abs(c)):
                    raise ValueError("constant coefficient must be real")
                const = c.real
                continue
            if not self._is_canonical(k):
                continue  # handled through its canonical partner
            mk = tuple(-x for x in k)
            if mk in full:
                if abs(full[mk] - np.conj(c)) > 1e-12 * max(1.0, abs(c)):
                    raise ValueError(f"coefficients at {k} and {mk} break Hermitian symmetry")
            if c != 0:
                half[k] = c
        for k in full:  # conjugate-only entries: imply the canonical partner
            if not self._is_canonical(k) and any(k):
                mk = tuple(-x for x in k)
                if mk not in full and full[k] != 0:
                    half[mk] = np.conj(full[k])
        self.constant = const
        self._half = half
        self._keys = np.array(sorted(self._half.keys()), dtype=int).reshape(-1, self.dim)
        self._vals = np.array([self._half[tuple(k)] for k in self._keys], dtype=complex)

    @staticmethod
    def _is_canonical(k: tuple) -> bool:
        for x in k:
            if x > 0:
                return True
            if x < 0:
                return False
        return False

    @classmethod
    def zero(cls, dim: int) -> "FourierPotential":
        return cls(dim, {})

    @classmethod
    def from_cosines(cls, dim: int, terms: Mapping[tuple, float]) -> "FourierPotential":
        """Build sum_k a_k cos(2 pi k.theta) from real amplitudes a_k."""
        coeffs: dict[tuple, complex] = {}
        for k, a in terms.items():
            k = _as_key(k)
            if all(x == 0 for x in k):
                coeffs[k] = coeffs.get(k, 0.0) + a
            else:
                if not cls._is_canonical(k):
                    k = tuple(-x for x in k)  # cosine is even in k
                coeffs[k] = coeffs.get(k, 0.0) + 0.5 * a
        return cls(dim, coeffs)

    def coefficients(self) -> dict[tuple, complex]:
        """Full coefficient map including implied conjugates and constant."""
        out: dict[tuple, complex] = {}
        if self.constant != 0.0:
            out[(0,) * self.dim] = complex(self.constant)
        for k, c in self._half.items():
            out[k] = c
            out[tuple(-x for x in k)] = np.conj(c)
        return out

    def coefficient(self, k) -> complex:
        k = _as_key(k)
        if all(x == 0 for x in k):
            return complex(self.constant)
        if self._is_canonical(k):
            return self._half.get(k, 0.0 + 0.0j)
        return np.conj(self._half.get(tuple(-x for x in k), 0.0 + 0.0j))

    @property
    def support(self) -> list[tuple]:
        return sorted(self._half.keys())

    def __call__(self, theta) -> float | np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if self._keys.size == 0:
            return self.constant + np.zeros(theta.shape[:-1]) if theta.ndim > 1 else self.constant
        phase = np.exp(1j * TWO_PI * (theta @ self._keys.T))
        return self.constant + 2.0 * np.real(phase @ self._vals)

    def gradient(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if self._keys.size == 0:
            return np.zeros_like(theta)
        phase = np.exp(1j * TWO_PI * (theta @ self._keys.T))
        return 2.0 * np.real((1j * TWO_PI) * (phase * self._vals) @ self._keys.astype(float))

    def hessian(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        h = np.zeros((self.dim, self.dim))
        if self._keys.size == 0:
            return h
        phase = np.exp(1j * TWO_PI * (theta @ self._keys.T))
        w = 2.0 * np.real(-(TWO_PI**2) * phase * self._vals)
        kk = self._keys.astype(float)
        return np.einsum("n,ni,nj->ij", w, kk, kk)

    def __add__(self, other: "FourierPotential") -> "FourierPotential":
        if other.dim != self.dim:
            raise DimensionMismatchError("cannot add potentials of different dimension")
        coeffs = self.coefficients()
        for k, c in other.coefficients().items():
            coeffs[k] = coeffs.get(k, 0.0) + c
        return FourierPotential(self.dim, coeffs)

    def __mul__(self, s: float) -> "FourierPotential":
        return FourierPotential(self.dim, {k: s * c for k, c in self.coefficients().items()})

    __rmul__ = __mul__

    def shifted(self, const: float) -> "FourierPotential":
        out = FourierPotential(self.dim, self.coefficients())
        out.constant += const
        out._rebuild()
        return out

    def _rebuild(self):
        self._keys = np.array(sorted(self._half.keys()), dtype=int).reshape(-1, self.dim)
        self._vals = np.array([self._half[tuple(k)] for k in self._keys], dtype=complex)

    def filtered(self, keep: Callable[[tuple], bool]) -> "FourierPotential":
        """Potential retaining the harmonics whose index satisfies `keep`."""
        coeffs = {k: c for k, c in self.coefficients().items() if keep(k)}
        return FourierPotential(self.dim, coeffs)

    def reindexed(self, kmap: Callable[[tuple], tuple], dim: int | None = None) -> "FourierPotential":
        """Potential with every harmonic k relabelled to kmap(k)."""
        dim = self.dim if dim is None else dim
        coeffs: dict[tuple, complex] = {}
        for k, c in self.coefficients().items():
            nk = _as_key(kmap(k))
            coeffs[nk] = coeffs.get(nk, 0.0) + c
        return FourierPotential(dim, coeffs)

    def translated(self, theta0) -> "FourierPotential":
        """Potential theta -> U(theta + theta0)."""
        theta0 = np.asarray(theta0, dtype=float)
        coeffs = {
            k: c * np.exp(1j * TWO_PI * np.dot(k, theta0))
            for k, c in self.coefficients().items()
        }
        return FourierPotential(self.dim, coeffs)

    def transformed(self, q: np.ndarray) -> "FourierPotential":
        """Potential in new angles theta~ = Q theta (Q unimodular integer).

        U~(theta~) = U(Q^-1 theta~); harmonics map as k -> (Q^-T) k.
        """
        q = np.asarray(q, dtype=int)
        qinvt = np.round(np.linalg.inv(q.T)).astype(int)
        if not np.allclose(qinvt @ q.T, np.eye(self.dim)):
            raise ValueError("angle change must be unimodular")
        return self.reindexed(lambda k: tuple(qinvt @ np.array(k)))

    def amplitude(self) -> float:
        """Sum of absolute coefficient values (crude sup-norm bound)."""
        return abs(self.constant) + 2.0 * float(np.sum(np.abs(self._vals)))

    def max_order(self) -> int:
        if self._keys.size == 0:
            return 0
        return int(np.max(np.abs(self._keys)))

    def certified_max(self, grid: int = 129, polish: bool = True) -> tuple[np.ndarray, float]:
        """Global maximum (argmax, value) by dense grid scan plus Newton polish."""
        axes = [np.linspace(0.0, 1.0, grid, endpoint=False)] * self.dim
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.dim)
        vals = self(mesh)
        i0 = int(np.argmax(vals))
        x = mesh[i0].copy()
        if polish and self._keys.size:
            for _ in range(60):
                g = self.gradient(x)
                h = self.hessian(x)
                try:
                    step = np.linalg.solve(h, g)
                except np.linalg.LinAlgError:
                    break
                if np.max(np.linalg.eigvalsh(h)) >= 0:  # not at a strict max yet
                    x = x - 0.2 * g / max(1.0, float(np.linalg.norm(g)))
                    continue
                x = x - step
                if np.linalg.norm(step) < 1e-14:
                    break
        x = np.mod(x, 1.0)
        return x, float(self(x))


class ParametricPotential:
    """Fourier map with action-dependent coefficients c_k(r).

    Each coefficient is a callable r -> complex (Hermitian symmetry is the
    caller's responsibility via conjugate pairs, or use `from_cosines`).
    """

    def __init__(self, dim: int, coefficients: Mapping[tuple, Callable]):
        self.dim = int(dim)
        self._coeffs = {_as_key(k): f for k, f in coefficients.items()}

    @classmethod
    def from_cosines(cls, dim: int, terms: Mapping[tuple, Callable]) -> "ParametricPotential":
        coeffs = {}
        for k, amp in terms.items():
            k = _as_key(k)
            if all(x == 0 for x in k):
                coeffs[k] = amp
            else:
                coeffs[k] = (lambda a: (lambda r: 0.5 * a(r)))(amp)
                coeffs[tuple(-x for x in k)] = (lambda a: (lambda r: 0.5 * np.conj(a(r))))(amp)
        return cls(dim, coeffs)

    def at_action(self, r) -> FourierPotential:
        r = np.asarray(r, dtype=float)
        return FourierPotential(self.dim, {k: f(r) for k, f in self._coeffs.items()})


def as_potential_at(f, r) -> FourierPotential:
    """Evaluate a FourierPotential or ParametricPotential at action r."""
    if isinstance(f, ParametricPotential):
        return f.at_action(r)
    return f


@dataclass(frozen=True)
class ClassicalSystem:
    """C(theta, r) = (1/2) T(r) + U(theta) with T quadratic, U trigonometric."""

    kinetic: QuadraticForm
    potential: FourierPotential
    critical_energy: float = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.kinetic.dim != self.potential.dim:
            raise DimensionMismatchError("kinetic and potential dimensions differ")
        _, umax = self.potential.certified_max()
        if self.critical_energy is None:
            object.__setattr__(self, "critical_energy", umax)
        elif abs(self.critical_energy - umax) > 1e-8 * max(1.0, abs(umax)):
            raise ValueError(
                f"declared critical energy {self.critical_energy} does not match "
                f"certified maximum {umax}"
            )

    @property
    def dim(self) -> int:
        return self.kinetic.dim

    def energy(self, state: "PhaseState") -> float:
        if state.angle.shape[0] != self.dim:
            raise DimensionMismatchError("state dimension does not match system")
        return 0.5 * self.kinetic(state.action) + float(self.potential(state.angle))

    def amended(self) -> "ClassicalSystem":
        """System with potential shifted and translated so max U = 0 at theta = 0."""
        x0, umax = self.potential.certified_max()
        pot = self.potential.translated(x0).shifted(-umax)
        return ClassicalSystem(self.kinetic, pot)

    def frequency(self, r) -> np.ndarray:
        """omega(r) = A r, the frequency of the kinetic part."""
        return self.kinetic.matrix @ np.asarray(r, dtype=float)


@dataclass(frozen=True)
class PhaseState:
    """Point (theta, r); angle stored in [0, 1)^m."""

    angle: np.ndarray
    action: np.ndarray

    def __post_init__(self):
        ang = np.mod(np.asarray(self.angle, dtype=float).ravel(), 1.0)
        act = np.asarray(self.action, dtype=float).ravel()
        if ang.shape != act.shape:
            raise DimensionMismatchError("angle and action dimensions differ")
        ang.setflags(write=False)
        act.setflags(write=False)
        object.__setattr__(self, "angle", ang)
        object.__setattr__(self, "action", act)

    @classmethod
    def of(cls, angle: Iterable[float], action: Iterable[float]) -> "PhaseState":
        return cls(np.asarray(angle, float), np.asarray(action, float))


class Trajectory:
    """Sampled solution of X^C with an unwrapped-lift companion.

    `angles` holds the lift in R^m (homology bookkeeping); `state(i)`
    reduces mod 1.  A dense interpolant is attached when the integrator
    provides one.
    """

    def __init__(self, times, angles_lifted, actions, energy: float,
                 energy_tol: float, dense=None):
        t = np.asarray(times, dtype=float)
        if np.any(np.diff(t) <= 0) and len(t) > 1:
            if np.all(np.diff(t) < 0):
                t = t[::-1].copy()
                angles_lifted = np.asarray(angles_lifted)[::-1]
                actions = np.asarray(actions)[::-1]
            else:
                raise ValueError("sample times must be strictly monotone")
        self.times = t
        self.angles = np.asarray(angles_lifted, dtype=float)
        self.actions = np.asarray(actions, dtype=float)
        self.energy = float(energy)
        self.energy_tol = float(energy_tol)
        self._dense = dense

    def __len__(self) -> int:
        return len(self.times)

    @property
    def dim(self) -> int:
        return self.angles.shape[1]

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0])

    def state(self, i: int) -> PhaseState:
        return PhaseState(self.angles[i], self.actions[i])

    def displacement(self) -> np.ndarray:
        """Lift displacement over the full sample; homology class when closed."""
        return self.angles[-1] - self.angles[0]

    def homology(self) -> np.ndarray:
        d = self.displacement()
        m = np.round(d).astype(int)
        return m

    def at_time(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        """Interpolated (lifted angle, action) at time t."""
        if self._dense is not None:
            y = self._dense(t)
            return y[: self.dim], y[self.dim:]
        ang = np.array([np.interp(t, self.times, self.angles[:, i]) for i in range(self.dim)])
        act = np.array([np.interp(t, self.times, self.actions[:, i]) for i in range(self.dim)])
        return ang, act

    def sample_angles(self, t: np.ndarray) -> np.ndarray:
        """Lifted angles at an array of times, shape (len(t), dim)."""
        t = np.asarray(t, dtype=float)
        if self._dense is not None:
            return self._dense(t)[: self.dim].T
        return np.stack(
            [np.interp(t, self.times, self.angles[:, i]) for i in range(self.dim)], axis=-1
        )

    def energy_drift(self, system: ClassicalSystem) -> float:
        vals = [
            0.5 * system.kinetic(self.actions[i]) + float(system.potential(self.angles[i]))
            for i in range(len(self))
        ]
        return float(np.max(np.abs(np.asarray(vals) - self.energy)))


# ---------------------------------------------------------------------------
# serialization


def system_to_text(sys: ClassicalSystem) -> str:
    """Structured text: kinetic matrix row-major, harmonics as (k, re, im)."""
    lines = [f"dim {sys.dim}"]
    lines.append("kinetic " + " ".join(repr(float(x)) for x in sys.kinetic.matrix.ravel()))
    for k, c in sorted(sys.potential.coefficients().items()):
        ks = " ".join(str(x) for x in k)
        lines.append(f"harmonic {ks} {float(c.real)!r} {float(c.imag)!r}")
    return "\n".join(lines) + "\n"


def system_from_text(text: str) -> ClassicalSystem:
    dim = None
    kin = None
    coeffs: dict[tuple, complex] = {}
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] == "dim":
            dim = int(parts[1])
        elif parts[0] == "kinetic":
            if dim is None:
                raise ValueError("dim must precede kinetic")
            kin = QuadraticForm(dim, np.array([float(x) for x in parts[1:]]).reshape(dim, dim))
        elif parts[0] == "harmonic":
            if dim is None:
                raise ValueError("dim must precede harmonics")
            k = tuple(int(x) for x in parts[1 : 1 + dim])
            re, im = float(parts[1 + dim]), float(parts[2 + dim])
            coeffs[k] = coeffs.get(k, 0.0) + complex(re, im)
        else:
            raise ValueError(f"unknown record {parts[0]!r}")
    if dim is None or kin is None:
        raise ValueError("incomplete system description")
    return ClassicalSystem(kin, FourierPotential(dim, coeffs))


def trajectory_to_csv(traj: Trajectory, system: ClassicalSystem | None = None) -> str:
    m = traj.dim
    header = ["t"] + [f"theta{i+1}" for i in range(m)] + [f"r{i+1}" for i in range(m)] + ["E"]
    rows = [",".join(header)]
    for i in range(len(traj)):
        if system is not None:
            e = 0.5 * system.kinetic(traj.actions[i]) + float(system.potential(traj.angles[i]))
        else:
            e = traj.energy
        cells = [repr(float(traj.times[i]))]
        cells += [repr(float(x)) for x in np.mod(traj.angles[i], 1.0)]
        cells += [repr(float(x)) for x in traj.actions[i]]
        cells.append(repr(float(e)))
        rows.append(",".join(cells))
    return "\n".join(rows) + "\n"
