"""One-step Lie averaging along a resonance.

Solves the homological equation exactly on Fourier coefficients, composes
the Hamiltonian with the numerically integrated time-1 flow of the
generator, and measures the non-averaged residual and its scaling in the
perturbation size.  Also provides the high-energy reduction of a 2-dof
classical system near a resonance line to a pendulum-like 1-dof system.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .resonance import AdaptedFrame, ResonanceModule, adapted_frame, averaged_system
from .systems import (
    ClassicalSystem,
    FourierPotential,
    QuadraticForm,
    as_potential_at,
)

__all__ = [
    "GeneratingFunction",
    "AveragedNormalForm",
    "ResonantDenominatorError",
    "DegenerateAveragedPotentialError",
    "solve_homological",
    "lie_average",
    "high_energy_reduction",
]

TWO_PI = 2.0 * np.pi


class ResonantDenominatorError(ValueError):
    def __init__(self, k_hat):
        super().__init__(f"exact resonance hit: k = {tuple(k_hat)}")
        self.witness = tuple(int(x) for x in k_hat)


class DegenerateAveragedPotentialError(ValueError):
    pass


@dataclass
class GeneratingFunction:
    """Solution S of omega_hat . dS/dtheta_hat = f - avg - tail.

    Coefficients S_k = f_k / (2 pi i k_hat . omega_hat) over harmonics with
    0 < |k_hat|_inf <= K; the fast block is the first `fast_dim` angles.
    """

    dim: int
    fast_dim: int
    K: int
    omega_hat: np.ndarray
    coefficients: dict = field(repr=False)

    def potential_like(self) -> FourierPotential:
        return FourierPotential(self.dim, self.coefficients)

    def __call__(self, theta) -> float:
        return float(self.potential_like()(np.asarray(theta, float)))

    def residual_by_harmonic(self, f: FourierPotential) -> dict:
        """Exact residual omega.dS - (f - avg - tail), harmonic by harmonic."""
        out = {}
        for k, c in f.coefficients().items():
            k_hat = np.array(k[: self.fast_dim], dtype=int)
            norm = int(np.max(np.abs(k_hat))) if k_hat.size else 0
            if norm == 0 or norm > self.K:
                continue  # slow or tail harmonic: not matched by S
            sk = self.coefficients.get(k, 0.0)
            lhs = TWO_PI * 1j * float(k_hat @ self.omega_hat) * sk
            out[k] = lhs - c
        return out

    def max_residual(self, f: FourierPotential) -> float:
        res = self.residual_by_harmonic(f)
        return max((abs(v) for v in res.values()), default=0.0)


def solve_homological(f: FourierPotential, omega_hat, K: int,
                      fast_dim: int | None = None) -> GeneratingFunction:
    """Coefficient-exact solve of the homological equation.

    Harmonics with 0 < |k_hat|_inf <= K are cancelled; the slow average
    and the |k_hat| > K tail are left alone.  Raises with the offending
    k_hat if a denominator vanishes.
    """
    omega_hat = np.asarray(omega_hat, dtype=float)
    if fast_dim is None:
        fast_dim = len(omega_hat)
    if fast_dim != len(omega_hat):
        raise ValueError("omega_hat length must equal the fast dimension")
    coeffs: dict[tuple, complex] = {}
    for k, c in f.coefficients().items():
        k_hat = np.array(k[:fast_dim], dtype=int)
        norm = int(np.max(np.abs(k_hat))) if k_hat.size else 0
        if norm == 0 or norm > K:
            continue
        denom = float(k_hat @ omega_hat)
        if denom == 0.0:
            raise ResonantDenominatorError(k_hat)
        coeffs[k] = c / (TWO_PI * 1j * denom)
    return GeneratingFunction(f.dim, fast_dim, K, omega_hat, coeffs)


class _LieGenerator:
    """Hamiltonian eps * S(theta, r) with r-dependent small denominators.

    S(theta, r) = sum f_k e^{2 pi i k.theta} / (2 pi i <g_k, r>) where
    g_k = A (k_hat, 0); provides the vector field and the time-1 flow.
    """

    def __init__(self, f: FourierPotential, kinetic: QuadraticForm, K: int,
                 fast_dim: int):
        self.dim = f.dim
        self.fast_dim = fast_dim
        keys, vals, gs = [], [], []
        a = kinetic.matrix
        for k, c in f.coefficients().items():
            k_hat = np.array(k[:fast_dim], dtype=int)
            norm = int(np.max(np.abs(k_hat))) if k_hat.size else 0
            if norm == 0 or norm > K:
                continue
            kfull = np.zeros(self.dim)
            kfull[:fast_dim] = k_hat
            keys.append(k)
            vals.append(c)
            gs.append(a @ kfull)
        self.keys = np.array(keys, dtype=int).reshape(-1, self.dim)
        self.vals = np.array(vals, dtype=complex)
        self.gs = np.array(gs, dtype=float).reshape(-1, self.dim)

    def check_denominators(self, r0, radius: float = 0.0):
        r0 = np.asarray(r0, dtype=float)
        for g, k in zip(self.gs, self.keys):
            d = abs(float(g @ r0)) - radius * float(np.linalg.norm(g))
            if d <= 0:
                raise ResonantDenominatorError(k[: self.fast_dim])

    def grads(self, theta, r):
        phase = np.exp(1j * TWO_PI * (self.keys @ theta))
        denom = TWO_PI * 1j * (self.gs @ r)
        coeff = self.vals * phase / denom
        ds_dtheta = np.real(1j * TWO_PI * coeff @ self.keys)
        ds_dr = np.real(-(coeff / (self.gs @ r)) @ self.gs)
        return ds_dtheta, ds_dr

    def flow_time1(self, theta, r, eps: float, rtol: float = 1e-12):
        if eps == 0.0:
            return np.array(theta, float), np.array(r, float)

        def rhs(_t, y):
            th, rr = y[: self.dim], y[self.dim :]
            dth, drr = self.grads(th, rr)
            return np.concatenate([eps * drr, -eps * dth])

        y0 = np.concatenate([theta, r])
        sol = solve_ivp(rhs, (0.0, 1.0), y0, method="DOP853", rtol=rtol, atol=rtol)
        if not sol.success:
            raise RuntimeError("generator flow failed: " + sol.message)
        y = sol.y[:, -1]
        return y[: self.dim], y[self.dim :]

    def jacobian_det(self, theta, r, eps: float, h: float = 1e-6) -> float:
        n = 2 * self.dim
        y0 = np.concatenate([theta, r])
        jac = np.empty((n, n))
        for j in range(n):
            yp = y0.copy(); yp[j] += h
            ym = y0.copy(); ym[j] -= h
            tp, rp = self.flow_time1(yp[: self.dim], yp[self.dim :], eps)
            tm, rm = self.flow_time1(ym[: self.dim], ym[self.dim :], eps)
            jac[:, j] = (np.concatenate([tp, rp]) - np.concatenate([tm, rm])) / (2 * h)
        return float(np.linalg.det(jac))


@dataclass
class AveragedNormalForm:
    """Measured one-step normal form H o Phi_eps = h + eps V + residual."""

    eps: float
    K: int
    averaged_part: ClassicalSystem
    residual_norms: dict
    grid_shape: tuple
    generator: GeneratingFunction
    samples: np.ndarray = field(repr=False)

    @property
    def residual_c0(self) -> float:
        return self.residual_norms[0]

    def report(self) -> dict:
        return {
            "eps": self.eps,
            "K": self.K,
            "residual_C0": self.residual_norms.get(0),
            "residual_C1": self.residual_norms.get(1),
            "residual_C2": self.residual_norms.get(2),
        }


def lie_average(kinetic: QuadraticForm, f, r0, eps: float, K: int,
                module: ResonanceModule | None = None,
                n_angle: int = 12, n_action: int = 1, action_radius: float = 0.0,
                flow_rtol: float = 1e-12) -> AveragedNormalForm:
    """Compose h + eps f with the time-1 flow of the homological generator.

    The transformed Hamiltonian is sampled on an angle grid times an
    action slice (or small box) around r0; the non-slow residual
    N - h - eps V is measured in sup norm, with spectral first and second
    angle derivatives.  On the exact resonance slice the residual scales
    like eps^2 (checked by the caller via eps-halving).
    """
    r0 = np.asarray(r0, dtype=float)
    dim = kinetic.dim
    pot = as_potential_at(f, r0)
    fast_dim = dim - (module.rank if module is not None else 1)
    gen = _LieGenerator(pot, kinetic, K, fast_dim)
    gen.check_denominators(r0, action_radius)
    omega_hat = (kinetic.matrix @ r0)[:fast_dim]
    sgen = solve_homological(pot, omega_hat, K, fast_dim)

    # exact averaged part: slow harmonics of f at r0, scaled by eps
    slow = pot.filtered(lambda k: not any(k[:fast_dim]))
    slow_reduced = slow.reindexed(lambda k: k[fast_dim:], dim - fast_dim)
    averaged = ClassicalSystem(kinetic, slow)

    axes = [np.linspace(0.0, 1.0, n_angle, endpoint=False)] * dim
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dim)
    if n_action > 1 and action_radius > 0:
        offsets = np.linspace(-action_radius, action_radius, n_action)
    else:
        offsets = np.array([0.0])
    shape = (len(offsets),) + (n_angle,) * dim
    resid = np.empty((len(offsets), len(mesh)))
    a = kinetic.matrix
    for io, off in enumerate(offsets):
        r_base = r0 + off * np.ones(dim) / np.sqrt(dim)
        for im, th in enumerate(mesh):
            th1, r1 = gen.flow_time1(th, r_base, eps, rtol=flow_rtol)
            n_val = 0.5 * float(r1 @ a @ r1) + eps * float(pot(th1))
            model = 0.5 * float(r_base @ a @ r_base) + eps * float(slow(th))
            resid[io, im] = n_val - model
    resid_grid = resid.reshape(shape)
    norms = {0: float(np.max(np.abs(resid)))}
    # spectral derivative norms in the angles
    spec = np.fft.fftn(resid_grid, axes=tuple(range(1, dim + 1)))
    freqs = np.fft.fftfreq(n_angle, d=1.0 / n_angle)
    for order in (1, 2):
        worst = 0.0
        for axis in range(dim):
            shape_ones = [1] * (dim + 1)
            shape_ones[axis + 1] = n_angle
            mult = (TWO_PI * 1j * freqs.reshape(shape_ones)) ** order
            dgrid = np.fft.ifftn(spec * mult, axes=tuple(range(1, dim + 1)))
            worst = max(worst, float(np.max(np.abs(dgrid.real))))
        norms[order] = worst
    return AveragedNormalForm(
        eps=eps, K=K,
        averaged_part=ClassicalSystem(
            QuadraticForm(dim - fast_dim, a[fast_dim:, fast_dim:]), slow_reduced
        ),
        residual_norms=norms, grid_shape=shape, generator=sgen, samples=resid_grid,
    )


def empirical_order(kinetic: QuadraticForm, f, r0, eps: float, K: int, **kw) -> dict:
    """Residual scaling exponent under eps-halving (expect about 2)."""
    n1 = lie_average(kinetic, f, r0, eps, K, **kw)
    n2 = lie_average(kinetic, f, r0, 0.5 * eps, K, **kw)
    r1, r2 = n1.residual_c0, n2.residual_c0
    order = np.log2(r1 / r2) if r2 > 0 else np.inf
    return {"eps": eps, "K": K, "residual_C0": r1, "residual_C0_half": r2,
            "empirical_order": float(order)}


# ---------------------------------------------------------------------------
# high-energy resonant reduction


def _class_frame(c) -> np.ndarray:
    """Unimodular Q with Q c = (1, 0): maps class c to the first angle."""
    c1, c2 = int(c[0]), int(c[1])
    g = np.gcd(c1, c2)
    if g != 1:
        raise ValueError("homology class must be primitive")
    # extended gcd: x c1 + y c2 = 1
    x, y = _ext_gcd(c1, c2)
    return np.array([[x, y], [-c2, c1]], dtype=int)


def _ext_gcd(a: int, b: int) -> tuple[int, int]:
    old_r, r = a, b
    old_s, s = 1, 0
    old_t, t = 0, 1
    while r != 0:
        q = old_r // r
        old_r, r = r, old_r - q * r
        old_s, s = s, old_s - q * s
        old_t, t = t, old_t - q * t
    if old_r < 0:
        old_s, old_t = -old_s, -old_t
    return old_s, old_t


def class_averaged_potential(sys: ClassicalSystem, c) -> FourierPotential:
    """Average of U along the direction of c: a 1-dof potential.

    Keeps the harmonics orthogonal to c; equals the fast-angle average in
    the frame where c = (1, 0).
    """
    q = _class_frame(c)
    u_t = sys.potential.transformed(q)
    slow = u_t.filtered(lambda k: k[0] == 0)
    return slow.reindexed(lambda k: (k[1],), 1)


def high_energy_reduction(sys: ClassicalSystem, c, r0=None) -> tuple[ClassicalSystem, dict]:
    """Pendulum-like reduction of a 2-dof system along the resonance of c.

    Returns the 1-dof system (1/2) m22 p^2 + U_c(phi) in the frame where
    c = (1, 0), plus a seed for the hyperbolic periodic orbit at the
    averaged potential's maximum, expressed in the original coordinates.
    Raises if U_c is constant (degenerate averaged potential).
    """
    c = np.asarray(c, dtype=int)
    q = _class_frame(c)
    a_t = q @ sys.kinetic.matrix @ q.T  # kinetic matrix in the new momenta
    u_c = class_averaged_potential(sys, c)
    if not u_c.support:
        raise DegenerateAveragedPotentialError("averaged potential is constant")
    m22 = float(a_t[1, 1])
    pendulum = ClassicalSystem(QuadraticForm(1, np.array([[m22]])), u_c)
    phi_star, _ = u_c.certified_max()
    hess = u_c.hessian(phi_star)[0, 0]
    if hess >= -1e-12:
        raise DegenerateAveragedPotentialError(
            f"averaged maximum at {phi_star} is degenerate (U_c'' = {hess})"
        )
    # seed: in tilde coordinates theta~2 = phi*, r~2* = 0; r~ on the
    # resonance line omega~2 = 0 at the requested action (or unit speed)
    if r0 is None:
        r1t = 1.0
    else:
        r0 = np.asarray(r0, dtype=float)
        rt = np.round(np.linalg.inv(q.T.astype(float)) @ r0, 12)
        r1t = float(rt[0])
    # resonance line in tilde coordinates: (A~ r~)_2 = 0
    r2t = -a_t[1, 0] / a_t[1, 1] * r1t
    rt = np.array([r1t, r2t])
    r_orig = q.T @ rt
    theta_orig = np.linalg.inv(q.astype(float)) @ np.array([0.0, float(phi_star[0])])
    omega1 = float((a_t @ rt)[0])
    seed = {
        "state_angle": np.mod(theta_orig, 1.0),
        "state_action": r_orig,
        "period_guess": 1.0 / abs(omega1) if omega1 != 0 else np.inf,
        "class_frame": q,
        "pendulum_fixed_angle": float(phi_star[0]),
        "resonant_action": rt,
    }
    return pendulum, seed
