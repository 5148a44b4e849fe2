"""POVM construction, Born-rule probabilities and reproducible outcome sampling."""

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import qcore
from .qcore import ket, projector

POVM_TOL = 1e-10
CLAMP_TOL = 1e-12
NORM_TOL = 1e-9


class InvalidPovmError(ValueError):
    pass


@dataclass(frozen=True)
class Povm:
    label: str
    elements: tuple[np.ndarray, ...]
    names: tuple[str, ...]

    def __post_init__(self):
        if len(self.elements) != len(self.names):
            raise InvalidPovmError("each POVM element needs an outcome name")
        check_povm(self)

    @property
    def dim(self) -> int:
        return self.elements[0].shape[0]

    def __len__(self) -> int:
        return len(self.elements)


def check_povm(povm: Povm, tol: float = POVM_TOL) -> Povm:
    if not povm.elements:
        raise InvalidPovmError("POVM has no elements")
    d = povm.elements[0].shape[0]
    total = np.zeros((d, d), dtype=complex)
    for name, e in zip(povm.names, povm.elements):
        if e.shape != (d, d):
            raise InvalidPovmError(f"element {name} has shape {e.shape}, expected {(d, d)}")
        if not qcore.is_hermitian(e, tol):
            raise InvalidPovmError(f"element {name} is not Hermitian")
        if qcore.herm_eig(e)[0][0] < -tol:
            raise InvalidPovmError(f"element {name} is not positive semidefinite")
        total = total + e
    if np.max(np.abs(total - np.eye(d))) > tol:
        raise InvalidPovmError(f"POVM {povm.label} does not sum to the identity")
    return povm


def _from_vectors(label: str, named_vectors) -> Povm:
    names = tuple(n for n, _ in named_vectors)
    elements = tuple(projector(v) for _, v in named_vectors)
    return Povm(label, elements, names)


PHI_PLUS = (ket("00") + ket("11")) / math.sqrt(2)
PHI_MINUS = (ket("00") - ket("11")) / math.sqrt(2)
PSI_PLUS = (ket("01") + ket("10")) / math.sqrt(2)
PSI_MINUS = (ket("01") - ket("10")) / math.sqrt(2)
PLUS = (ket("0") + ket("1")) / math.sqrt(2)
MINUS = (ket("0") - ket("1")) / math.sqrt(2)


def povm_bell() -> Povm:
    """Bell-basis projective measurement, optimal for the mutually conjugate model."""
    return _from_vectors(
        "bell",
        [("Phi+", PHI_PLUS), ("Phi-", PHI_MINUS), ("Psi+", PSI_PLUS), ("Psi-", PSI_MINUS)],
    )


def povm_aamcm() -> Povm:
    """Separable measurement: system in Z, ancilla in Z (system 0) or X (system 1)."""
    return _from_vectors(
        "aamcm",
        [
            ("0,0", np.kron(ket("0"), ket("0"))),
            ("0,1", np.kron(ket("0"), ket("1"))),
            ("1,+", np.kron(ket("1"), PLUS)),
            ("1,-", np.kron(ket("1"), MINUS)),
        ],
    )


def povm_mem() -> Povm:
    """Two product projectors plus two entangled ones, optimal for the maximal entanglement model."""
    return _from_vectors(
        "mem",
        [("00", ket("00")), ("11", ket("11")), ("Psi+", PSI_PLUS), ("Psi-", PSI_MINUS)],
    )


PAULI_BASES = {
    "z": (ket("0"), ket("1")),
    "x": (PLUS, MINUS),
    "y": ((ket("0") + 1j * ket("1")) / math.sqrt(2), (ket("0") - 1j * ket("1")) / math.sqrt(2)),
}
DEFAULT_MUB_WEIGHTS = {"z": 0.5, "x": 0.25, "y": 0.25}


def povm_mub_like(weights: dict[str, float] | None = None) -> Povm:
    """Randomized single-qubit measurement in Pauli eigenbases.

    Basis ``b`` is chosen with probability ``weights[b]``; the resulting POVM
    has elements ``w_b |b_k><b_k|``.
    """
    weights = dict(DEFAULT_MUB_WEIGHTS if weights is None else weights)
    unknown = set(weights) - set(PAULI_BASES)
    if unknown:
        raise InvalidPovmError(f"unknown bases {sorted(unknown)}; choose from z, x, y")
    if any(wt < 0 for wt in weights.values()):
        raise InvalidPovmError("basis weights must be nonnegative")
    if abs(sum(weights.values()) - 1.0) > 1e-12:
        raise InvalidPovmError(f"basis weights sum to {sum(weights.values())}, not 1")
    names, elements = [], []
    for b in ("z", "x", "y"):
        wt = weights.get(b, 0.0)
        if wt == 0.0:
            continue
        for sign, v in zip("+-", PAULI_BASES[b]):
            names.append(f"{b}{sign}")
            elements.append(wt * projector(v))
    label = "mub" if weights == DEFAULT_MUB_WEIGHTS else "mub[" + ",".join(f"{b}={weights[b]:g}" for b in weights) + "]"
    return Povm(label, tuple(elements), tuple(names))


def povm_product(a: Povm, b: Povm, label: str | None = None) -> Povm:
    """Independent measurements on the two factors of a bipartite system."""
    elements = tuple(np.kron(ea, eb) for ea in a.elements for eb in b.elements)
    names = tuple(f"{na}|{nb}" for na in a.names for nb in b.names)
    return Povm(label or f"{a.label}x{b.label}", elements, names)


def povm_trivial(dim: int) -> Povm:
    return Povm("trivial", (np.eye(dim, dtype=complex),), ("1",))


def born_probabilities(state, povm: Povm) -> np.ndarray:
    """Outcome distribution p_k = <psi|E_k|psi> (or Tr(rho E_k) for a matrix input)."""
    state = np.asarray(state, dtype=complex)
    if state.shape[0] != povm.dim:
        raise qcore.DimensionError(f"state of dimension {state.shape[0]} vs POVM of dimension {povm.dim}")
    if state.ndim == 1:
        p = np.array([np.vdot(state, e @ state).real for e in povm.elements])
    else:
        p = np.array([np.trace(state @ e).real for e in povm.elements])
    if np.any(p < -CLAMP_TOL):
        raise ValueError(f"negative probability {p.min():.3e}")
    p = np.clip(p, 0.0, None)
    total = p.sum()
    if abs(total - 1.0) > NORM_TOL:
        raise ValueError(f"probabilities sum to {total}")
    return p / total


def probability_table(model, povm: Povm, thetas, phis) -> np.ndarray:
    """p(k | theta_a, phi_b) for every grid node, shape (len(povm), len(thetas), len(phis))."""
    out = np.empty((len(povm), len(thetas), len(phis)))
    elements = np.array(povm.elements)
    for a, t in enumerate(thetas):
        for b, p in enumerate(phis):
            v = model._amplitudes(t, p)[0]
            out[:, a, b] = np.einsum("i,kij,j->k", v.conj(), elements, v).real
    np.clip(out, 0.0, None, out=out)
    out /= out.sum(axis=0, keepdims=True)
    return out


# --- sampling ----------------------------------------------------------------

@dataclass(frozen=True)
class OutcomeSample:
    counts: np.ndarray
    m: int
    seed: int


def stream_seed(master_seed: int, *keys: int) -> int:
    """Derive an independent 64-bit seed for the stream labelled by ``keys``."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, np.uint64)[0])


def make_rng(seed: int) -> np.random.Generator:
    # Philox: counter-based, 64-bit keyed
    return np.random.Generator(np.random.Philox(key=int(seed) & 0xFFFFFFFFFFFFFFFF))


def sample_outcomes(probs: Sequence[float], m: int, seed: int) -> OutcomeSample:
    probs = np.asarray(probs, dtype=float)
    if m < 0:
        raise ValueError("number of draws must be nonnegative")
    if np.any(probs < 0):
        raise ValueError("probabilities must be nonnegative")
    total = probs.sum()
    if abs(total - 1.0) > NORM_TOL:
        raise ValueError(f"probabilities sum to {total}")
    counts = make_rng(seed).multinomial(m, probs / total)
    return OutcomeSample(counts.astype(np.int64), int(m), int(seed))
