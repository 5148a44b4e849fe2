"""Precision bounds: SLDs, QFIm, mean Uhlmann curvature, classical FIm, QCRB and HCRB."""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from . import qcore
from .measurement import Povm, born_probabilities, check_povm
from .models import FD_STEP, StatisticalModel, as_point

KERNEL_TOL = 1e-12
P_FLOOR = 1e-12
DP_FLOOR = 1e-9
POLE_TOL = 1e-6


class SingularQfimError(ValueError):
    """The information matrix is not invertible (e.g. phi is unidentifiable at a pole)."""


class HcrbConvergenceError(RuntimeError):
    def __init__(self, best: float, gap: float):
        super().__init__(f"HCRB minimization did not converge: best={best:.10g}, gap={gap:.3g}")
        self.best = best
        self.gap = gap


class InformationDivergenceWarning(RuntimeWarning):
    """An outcome with vanishing probability has a non-vanishing derivative."""


def fubini_study_weight(lam) -> np.ndarray:
    lam = as_point(lam)
    return np.diag([1.0, math.sin(lam.theta) ** 2])


def check_weight(w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.shape != (2, 2) or not np.allclose(w, w.T, atol=1e-12):
        raise ValueError("weight matrix must be a real symmetric 2x2 matrix")
    if np.linalg.eigvalsh(w)[0] <= 0:
        raise ValueError("weight matrix must be positive definite")
    return w


def sld(rho, drho, kernel_tol: float = KERNEL_TOL) -> np.ndarray:
    """Symmetric logarithmic derivative L solving drho = (rho L + L rho) / 2.

    Components outside the support (p_m + p_n <= kernel_tol) are set to zero.
    """
    rho, drho = qcore.as_cmatrix(rho), qcore.as_cmatrix(drho)
    if not qcore.is_hermitian(drho, 1e-10):
        raise qcore.NotHermitianError("drho must be Hermitian")
    p, v = qcore.herm_eig(rho)
    d = v.conj().T @ drho @ v
    denom = p[:, None] + p[None, :]
    mask = denom > kernel_tol
    l_eig = np.zeros_like(d)
    l_eig[mask] = 2 * d[mask] / denom[mask]
    out = v @ l_eig @ v.conj().T
    return 0.5 * (out + out.conj().T)


def slds(model: StatisticalModel, lam) -> tuple[np.ndarray, list[np.ndarray], list[np.ndarray]]:
    rho = model.density(lam)
    drhos = [model.derivative(lam, i) for i in (0, 1)]
    return rho, drhos, [sld(rho, dr) for dr in drhos]


def qfim_from_slds(rho, ls) -> np.ndarray:
    n = len(ls)
    q = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            q[i, j] = 0.5 * np.trace(rho @ (ls[i] @ ls[j] + ls[j] @ ls[i])).real
    return q


def uhlmann_from_slds(rho, ls) -> np.ndarray:
    n = len(ls)
    u = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            u[i, j] = (0.25j * np.trace(rho @ (ls[i] @ ls[j] - ls[j] @ ls[i]))).real
    return u


def qfim(model: StatisticalModel, lam) -> np.ndarray:
    rho, _, ls = slds(model, lam)
    return qfim_from_slds(rho, ls)


def uhlmann(model: StatisticalModel, lam) -> np.ndarray:
    rho, _, ls = slds(model, lam)
    return uhlmann_from_slds(rho, ls)


def weak_commutativity_holds(model: StatisticalModel, lam, tol: float = 1e-8) -> bool:
    return bool(np.max(np.abs(uhlmann(model, lam))) < tol)


@dataclass
class FimResult:
    matrix: np.ndarray
    diverging_outcomes: list[str] = field(default_factory=list)


def _prob_and_derivatives(model, povm, lam, method, h):
    lam = as_point(lam)
    probs = born_probabilities(model.state(lam), povm)
    if method == "analytic":
        dps = [np.array([np.trace(model.derivative(lam, i) @ e).real for e in povm.elements]) for i in (0, 1)]
    elif method == "central-fd":
        x = lam.as_array()
        dps = []
        for i in (0, 1):
            step = np.zeros(2)
            step[i] = h
            hi = [np.vdot(v, e @ v).real for e in povm.elements for v in [model._amplitudes(*(x + step))[0]]]
            lo = [np.vdot(v, e @ v).real for e in povm.elements for v in [model._amplitudes(*(x - step))[0]]]
            dps.append((np.array(hi) - np.array(lo)) / (2 * h))
    else:
        raise ValueError(f"unknown FIm method {method!r}")
    return probs, np.array(dps)


def fim_details(model: StatisticalModel, povm: Povm, lam, method: str = "analytic", h: float = FD_STEP) -> FimResult:
    check_povm(povm)
    if povm.dim != model.dim:
        raise qcore.DimensionError(f"POVM acts on dimension {povm.dim}, model on {model.dim}")
    probs, dps = _prob_and_derivatives(model, povm, lam, method, h)
    f = np.zeros((2, 2))
    diverging = []
    for k, p in enumerate(probs):
        g = dps[:, k]
        if p < P_FLOOR:
            if np.max(np.abs(g)) >= DP_FLOOR:
                diverging.append(povm.names[k])
            continue
        f += np.outer(g, g) / p
    return FimResult(0.5 * (f + f.T), diverging)


def fim(model: StatisticalModel, povm: Povm, lam, method: str = "analytic", h: float = FD_STEP) -> np.ndarray:
    res = fim_details(model, povm, lam, method, h)
    if res.diverging_outcomes:
        warnings.warn(
            f"outcomes {res.diverging_outcomes} have p < {P_FLOOR} with non-zero derivative",
            InformationDivergenceWarning,
            stacklevel=2,
        )
    return res.matrix


def weighted_inverse_trace(info, w) -> float:
    """Tr(W info^-1); raises SingularQfimError when info is not invertible."""
    info = np.asarray(info, dtype=float)
    det = np.linalg.det(info)
    if not np.isfinite(det) or abs(det) <= 1e-12 * max(1.0, np.max(np.abs(info)) ** 2):
        raise SingularQfimError(f"information matrix is singular (det={det:.3e})")
    return float(np.trace(np.asarray(w) @ np.linalg.inv(info)))


def scalar_qcrb(q, w) -> float:
    return weighted_inverse_trace(q, check_weight(w))


def _check_pole(lam) -> None:
    if math.sin(as_point(lam).theta) < POLE_TOL:
        raise SingularQfimError("phi is unidentifiable at theta in {0, pi}")


# --- Holevo Cramer-Rao bound -------------------------------------------------

def hermitian_basis(d: int) -> list[np.ndarray]:
    """Orthonormal basis (Hilbert-Schmidt) of d x d Hermitian matrices."""
    basis = []
    for k in range(d):
        m = np.zeros((d, d), dtype=complex)
        m[k, k] = 1.0
        basis.append(m)
    for j in range(d):
        for k in range(j + 1, d):
            m = np.zeros((d, d), dtype=complex)
            m[j, k] = m[k, j] = 1 / math.sqrt(2)
            basis.append(m)
            m = np.zeros((d, d), dtype=complex)
            m[j, k] = -1j / math.sqrt(2)
            m[k, j] = 1j / math.sqrt(2)
            basis.append(m)
    return basis


def holevo_functional(rho, xs, w) -> float:
    """Tr(W Re Z) + 2 sqrt(det W) |Im Z_12| with Z_ij = Tr(rho X_i X_j)."""
    z = np.array([[np.trace(rho @ xi @ xj) for xj in xs] for xi in xs])
    return float(np.trace(w @ z.real) + 2 * math.sqrt(np.linalg.det(w)) * abs(z[0, 1].imag))


@dataclass
class HcrbResult:
    value: float
    lower: float
    upper: float
    observables: list[np.ndarray]
    kappa: float

    @property
    def gap(self) -> float:
        return self.upper - self.lower


class _HolevoProblem:
    """Locally unbiased observables X_j = sum_k x_jk B_k with linear constraints.

    For fixed kappa in [-1, 1] the functional
        Tr(W Re Z) + 2 kappa sqrt(det W) Im Z_12 = Tr(A_kappa Z),
        A_kappa = W + i kappa sqrt(det W) [[0, 1], [-1, 0]] >= 0,
    is a convex quadratic in x; the HCRB is the max over kappa of its
    constrained minimum (minimax over a convex-concave saddle).
    """

    def __init__(self, rho, drhos, w):
        d = rho.shape[0]
        self.rho, self.w, self.d = rho, w, d
        self.basis = hermitian_basis(d)
        nb = len(self.basis)
        self.nb = nb
        self.s = np.array([[np.trace(rho @ bk @ bl) for bl in self.basis] for bk in self.basis])
        r = np.array([np.trace(rho @ b).real for b in self.basis])
        g = np.array([[np.trace(dr @ b).real for b in self.basis] for dr in drhos])
        rows, rhs = [], []
        for j in range(2):
            block = np.zeros((3, 2 * nb))
            block[0, j * nb:(j + 1) * nb] = r
            block[1, j * nb:(j + 1) * nb] = g[0]
            block[2, j * nb:(j + 1) * nb] = g[1]
            rows.append(block)
            rhs.extend([0.0, 1.0 if j == 0 else 0.0, 1.0 if j == 1 else 0.0])
        self.c = np.vstack(rows)
        self.b = np.array(rhs)
        self.sqrt_det_w = math.sqrt(np.linalg.det(w))

    def quad(self, kappa):
        a = self.w + 1j * kappa * self.sqrt_det_w * np.array([[0, 1], [-1, 0]])
        m = np.kron(a.T, self.s)
        return 0.5 * (m + m.conj().T).real

    def solve(self, kappa):
        p = self.quad(kappa)
        n, k = p.shape[0], self.c.shape[0]
        kkt = np.zeros((n + k, n + k))
        kkt[:n, :n] = 2 * p
        kkt[:n, n:] = self.c.T
        kkt[n:, :n] = self.c
        sol = np.linalg.lstsq(kkt, np.concatenate([np.zeros(n), self.b]), rcond=1e-13)[0]
        x = sol[:n]
        if np.max(np.abs(self.c @ x - self.b)) > 1e-8:
            raise HcrbConvergenceError(math.nan, math.inf)
        return float(x @ p @ x), x

    def observables(self, x):
        nb = self.nb
        return [sum(c * bk for c, bk in zip(x[j * nb:(j + 1) * nb], self.basis)) for j in range(2)]

    def primal(self, x):
        return holevo_functional(self.rho, self.observables(x), self.w)


def hcrb_details(model: StatisticalModel, lam, w=None, rtol: float = 1e-4) -> HcrbResult:
    lam = as_point(lam)
    _check_pole(lam)
    w = fubini_study_weight(lam) if w is None else check_weight(w)
    rho, drhos, ls = slds(model, lam)
    q = qfim_from_slds(rho, ls)
    if abs(np.linalg.det(q)) < 1e-12:
        raise SingularQfimError("QFIm is singular")
    prob = _HolevoProblem(rho, drhos, w)

    # SLD-optimal starting point X_i = sum_j (Q^-1)_ij L_j is feasible
    qinv = np.linalg.inv(q)
    sld_x = [qinv[i, 0] * ls[0] + qinv[i, 1] * ls[1] for i in range(2)]
    best_upper = holevo_functional(rho, sld_x, w)
    best_obs = sld_x

    cache = {}

    def neg_dual(kappa):
        if kappa not in cache:
            cache[kappa] = prob.solve(kappa)
        return -cache[kappa][0]

    candidates = [-1.0, 0.0, 1.0]
    res = minimize_scalar(neg_dual, bounds=(-1.0, 1.0), method="bounded", options={"xatol": 1e-10})
    candidates.append(float(res.x))
    for k in candidates:
        neg_dual(k)
    kappa_star = max(cache, key=lambda k: cache[k][0])
    lower = cache[kappa_star][0]

    for k, (_, x) in cache.items():
        val = prob.primal(x)
        if val < best_upper:
            best_upper, best_obs = val, prob.observables(x)

    if best_upper - lower > rtol * abs(lower):
        # at a kink of the dual the primal optimum mixes the two one-sided solutions
        eps = 1e-6
        lo_k, hi_k = max(-1.0, kappa_star - eps), min(1.0, kappa_star + eps)
        x_lo, x_hi = prob.solve(lo_k)[1], prob.solve(hi_k)[1]
        mix = minimize_scalar(
            lambda t: prob.primal(t * x_lo + (1 - t) * x_hi),
            bounds=(0.0, 1.0), method="bounded", options={"xatol": 1e-12},
        )
        x_mix = mix.x * x_lo + (1 - mix.x) * x_hi
        val = prob.primal(x_mix)
        if val < best_upper:
            best_upper, best_obs = val, prob.observables(x_mix)

    gap = best_upper - lower
    if gap > rtol * abs(lower):
        raise HcrbConvergenceError(best_upper, gap)
    return HcrbResult(best_upper, lower, best_upper, best_obs, kappa_star)


def hcrb(model: StatisticalModel, lam, w=None) -> float:
    return hcrb_details(model, lam, w).value


def hcrb_closed_form(q, u, w) -> float:
    """Tr(W Q^-1) + 4 sqrt(det W) |U_12| / det Q, valid for pure two-parameter models."""
    q, u, w = np.asarray(q), np.asarray(u), np.asarray(w)
    return weighted_inverse_trace(q, w) + 4 * math.sqrt(np.linalg.det(w)) * abs(u[0, 1]) / np.linalg.det(q)


@dataclass
class BoundsReport:
    model: str
    theta: float
    phi: float
    qfim: np.ndarray
    uhlmann: np.ndarray
    scalar_qcrb: float
    hcrb: float
    fim_by_povm: dict[str, np.ndarray]
    fim_bound_by_povm: dict[str, float]


def bounds_report(model: StatisticalModel, lam, povms=(), w=None) -> BoundsReport:
    lam = as_point(lam)
    _check_pole(lam)
    w = fubini_study_weight(lam) if w is None else check_weight(w)
    rho, _, ls = slds(model, lam)
    q = qfim_from_slds(rho, ls)
    u = uhlmann_from_slds(rho, ls)
    fims, fim_bounds = {}, {}
    for povm in povms:
        f = fim(model, povm, lam)
        fims[povm.label] = f
        try:
            fim_bounds[povm.label] = weighted_inverse_trace(f, w)
        except SingularQfimError:
            fim_bounds[povm.label] = math.inf
    return BoundsReport(
        model.name, lam.theta, lam.phi, q, u, scalar_qcrb(q, w), hcrb(model, lam, w), fims, fim_bounds
    )
