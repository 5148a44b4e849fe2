"""Parameterized pure-state statistical models and their antiunitary symmetries.

All models are built from the qubit probe

    |psi(theta, phi)> = cos(theta/2)|0> + exp(i phi) sin(theta/2)|1>

Tensor ordering is copy-1 (x) copy-2 for the two-copy models and
system (x) ancilla for the ancilla-assisted ones, second factor fastest.
"""

import enum
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import qcore
from .qcore import I2, SIGMA_X, SIGMA_Y, SWAP

FD_STEP = 1e-5
PARAM_NAMES = ("theta", "phi")


class ModelKind(str, enum.Enum):
    SINGLE_QUBIT = "single_qubit"
    PARALLEL = "parallel"
    MCM = "mcm"
    AAMCM = "aamcm"
    MEM = "mem"


@dataclass(frozen=True)
class ParamPoint:
    theta: float
    phi: float

    def __post_init__(self):
        if not (math.isfinite(self.theta) and math.isfinite(self.phi)):
            raise ValueError("parameters must be finite")
        if not 0.0 <= self.theta <= math.pi:
            raise ValueError(f"theta={self.theta} outside [0, pi]")
        if not 0.0 <= self.phi <= 2 * math.pi:
            raise ValueError(f"phi={self.phi} outside [0, 2pi]")

    def as_array(self) -> np.ndarray:
        return np.array([self.theta, self.phi])


def as_point(lam) -> ParamPoint:
    if isinstance(lam, ParamPoint):
        return lam
    theta, phi = lam
    return ParamPoint(float(theta), float(phi))


@dataclass(frozen=True)
class Antiunitary:
    """Antiunitary map v -> U conj(v)."""

    unitary: np.ndarray
    label: str = ""

    def __post_init__(self):
        u = qcore.as_cmatrix(self.unitary)
        if np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))) > 1e-10:
            raise ValueError("unitary part of an antiunitary operator must be unitary")

    def apply(self, v) -> np.ndarray:
        return self.unitary @ np.conj(v)

    def conjugate_operator(self, rho) -> np.ndarray:
        """Theta rho Theta^dagger = U conj(rho) U^dagger."""
        return self.unitary @ np.conj(rho) @ self.unitary.conj().T


# Single-qubit probe and its derivatives, as functions of (theta, phi).

def qubit_state(lam) -> np.ndarray:
    lam = as_point(lam)
    c, s = math.cos(lam.theta / 2), math.sin(lam.theta / 2)
    return np.array([c, np.exp(1j * lam.phi) * s])


def _psi(t, p):
    c, s, e = math.cos(t / 2), math.sin(t / 2), np.exp(1j * p)
    return (
        np.array([c, e * s]),
        np.array([-s / 2, e * c / 2]),
        np.array([0.0, 1j * e * s]),
    )


def _psi_conj(t, p):
    return tuple(np.conj(x) for x in _psi(t, p))


def _psi_perp(t, p):
    # orthogonal partner exp(-i phi) sin(theta/2)|0> - cos(theta/2)|1>
    c, s, e = math.cos(t / 2), math.sin(t / 2), np.exp(-1j * p)
    return (
        np.array([e * s, -c]),
        np.array([e * c / 2, s / 2]),
        np.array([-1j * e * s, 0.0]),
    )


_KET0 = (np.array([1.0, 0.0]), np.zeros(2), np.zeros(2))
_KET1 = (np.array([0.0, 1.0]), np.zeros(2), np.zeros(2))


def _tensor(a, b):
    """Product rule for (v, d_theta v, d_phi v) triples."""
    return tuple(
        [np.kron(a[0], b[0])]
        + [np.kron(a[k], b[0]) + np.kron(a[0], b[k]) for k in (1, 2)]
    )


def _superpose(x, y):
    return tuple((xi + yi) / math.sqrt(2) for xi, yi in zip(x, y))


def _single(t, p):
    return _psi(t, p)


def _parallel(t, p):
    psi = _psi(t, p)
    return _tensor(psi, psi)


def _mcm(t, p):
    return _tensor(_psi(t, p), _psi_conj(t, p))


def _aamcm(t, p):
    return _superpose(_tensor(_psi(t, p), _KET0), _tensor(_psi_conj(t, p), _KET1))


def _mem(t, p):
    return _superpose(_tensor(_psi(t, p), _KET0), _tensor(_psi_perp(t, p), _KET1))


@dataclass(frozen=True)
class StatisticalModel:
    kind: ModelKind
    dim: int
    _amplitudes: Callable
    symmetry: Optional[Antiunitary] = None
    n_qubits: int = 1

    @property
    def name(self) -> str:
        return self.kind.value

    def state(self, lam) -> np.ndarray:
        lam = as_point(lam)
        return self._amplitudes(lam.theta, lam.phi)[0]

    def state_derivative(self, lam, i: int) -> np.ndarray:
        _check_index(i)
        lam = as_point(lam)
        return self._amplitudes(lam.theta, lam.phi)[1 + i]

    def density(self, lam) -> np.ndarray:
        return qcore.projector(self.state(lam))

    def derivative(self, lam, i: int, method: str = "analytic", h: float = FD_STEP) -> np.ndarray:
        return derivative(self, lam, i, method=method, h=h)


def _check_index(i: int) -> None:
    if i not in (0, 1):
        raise IndexError(f"parameter index {i} out of range for a 2-parameter model")


def derivative(model: StatisticalModel, lam, i: int, method: str = "analytic", h: float = FD_STEP) -> np.ndarray:
    """d rho / d lambda_i, either from closed-form amplitude derivatives or central differences."""
    _check_index(i)
    lam = as_point(lam)
    if method == "analytic":
        amps = model._amplitudes(lam.theta, lam.phi)
        v, dv = amps[0], amps[1 + i]
        outer = np.outer(dv, v.conj())
        return outer + outer.conj().T
    if method == "central-fd":
        x = np.array([lam.theta, lam.phi])
        step = np.zeros(2)
        step[i] = h
        # raw amplitudes: ParamPoint validation would reject steps across the domain edge
        plus = qcore.projector(model._amplitudes(*(x + step))[0])
        minus = qcore.projector(model._amplitudes(*(x - step))[0])
        return (plus - minus) / (2 * h)
    raise ValueError(f"unknown derivative method {method!r}")


SWAP_CONJ = Antiunitary(SWAP, "S conj(x)conj")
ANCILLA_FLIP_CONJ = Antiunitary(np.kron(I2, SIGMA_X), "(I x sigma_x) conj")
SPIN_FLIP_PAIR = Antiunitary(np.kron(SIGMA_Y, SIGMA_Y), "(sigma_y conj) x (sigma_y conj)")

DECLARED_OPERATORS = {
    ModelKind.MCM: SWAP_CONJ,
    ModelKind.AAMCM: ANCILLA_FLIP_CONJ,
    ModelKind.MEM: SPIN_FLIP_PAIR,
}

# one-qubit counterparts of the declared operators, used as negative controls
SINGLE_QUBIT_OPERATORS = (
    Antiunitary(I2, "conj"),
    Antiunitary(SIGMA_X, "sigma_x conj"),
    Antiunitary(SIGMA_Y, "sigma_y conj"),
)

_BUILDERS = {
    ModelKind.SINGLE_QUBIT: (_single, 2, 1),
    ModelKind.PARALLEL: (_parallel, 4, 2),
    ModelKind.MCM: (_mcm, 4, 2),
    ModelKind.AAMCM: (_aamcm, 4, 2),
    ModelKind.MEM: (_mem, 4, 2),
}


def build_model(kind) -> StatisticalModel:
    kind = ModelKind(kind)
    fn, dim, n_qubits = _BUILDERS[kind]
    return StatisticalModel(kind, dim, fn, DECLARED_OPERATORS.get(kind), n_qubits)


ALL_KINDS = tuple(ModelKind)


@dataclass(frozen=True)
class GasReport:
    holds: bool
    max_deviation: float
    worst_point: tuple[float, float]


def default_grid(n: int = 9, margin: float = 0.1) -> list[ParamPoint]:
    thetas = np.linspace(margin, math.pi - margin, n)
    phis = np.linspace(margin, 2 * math.pi - margin, n)
    return [ParamPoint(t, p) for t in thetas for p in phis]


def check_gas(model: StatisticalModel, grid=None, tol: float = 1e-10, operator: Optional[Antiunitary] = None) -> GasReport:
    """Test Theta rho Theta^dagger == rho over a parameter grid.

    ``operator`` overrides the model's declared symmetry (used for negative
    controls).
    """
    op = operator if operator is not None else model.symmetry
    if op is None:
        raise ValueError(f"model {model.name} has no declared antiunitary symmetry")
    if op.unitary.shape[0] != model.dim:
        raise qcore.DimensionError("operator dimension does not match the model")
    grid = default_grid() if grid is None else [as_point(g) for g in grid]
    worst, worst_at = 0.0, (math.nan, math.nan)
    for lam in grid:
        rho = model.density(lam)
        dev = float(np.max(np.abs(op.conjugate_operator(rho) - rho)))
        if dev > worst or math.isnan(worst_at[0]):
            worst, worst_at = dev, (lam.theta, lam.phi)
    return GasReport(worst < tol, worst, worst_at)
