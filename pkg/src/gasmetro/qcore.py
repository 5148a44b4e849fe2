"""Dense complex linear algebra for small Hilbert spaces (d <= 8).

Matrices are plain ``numpy`` complex arrays.  The Hermitian eigensolver is a
cyclic complex Jacobi iteration so results are deterministic and independent
of the LAPACK build.
"""

import numpy as np

VALIDATION_TOL = 1e-10
EIG_TOL = 1e-12
MAX_DIM = 8

I2 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
SWAP = np.array(
    [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex
)


class DimensionError(ValueError):
    """Operand shapes are incompatible."""


class NotHermitianError(ValueError):
    pass


class InvalidStateError(ValueError):
    pass


def as_cmatrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2:
        raise DimensionError(f"expected a matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def kron(a, b) -> np.ndarray:
    return np.kron(as_cmatrix(a), as_cmatrix(b))


def dagger(a) -> np.ndarray:
    return as_cmatrix(a).conj().T


def matmul(a, b) -> np.ndarray:
    a, b = as_cmatrix(a), as_cmatrix(b)
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def add(a, b) -> np.ndarray:
    a, b = as_cmatrix(a), as_cmatrix(b)
    if a.shape != b.shape:
        raise DimensionError(f"cannot add {a.shape} and {b.shape}")
    return a + b


def scale(a, z: complex) -> np.ndarray:
    return complex(z) * as_cmatrix(a)


def _square(a) -> np.ndarray:
    m = as_cmatrix(a)
    if m.shape[0] != m.shape[1]:
        raise DimensionError(f"expected a square matrix, got {m.shape}")
    return m


def trace(a) -> complex:
    return complex(np.trace(_square(a)))


def is_hermitian(a, tol: float = VALIDATION_TOL) -> bool:
    m = _square(a)
    return bool(np.max(np.abs(m - m.conj().T), initial=0.0) <= tol)


def partial_trace(m, dims: tuple[int, int], keep: int) -> np.ndarray:
    """Reduce a bipartite operator onto subsystem ``keep`` (0 = A, 1 = B)."""
    m = _square(m)
    d_a, d_b = dims
    if m.shape[0] != d_a * d_b:
        raise DimensionError(f"operator of size {m.shape[0]} does not match dims {dims}")
    t = m.reshape(d_a, d_b, d_a, d_b)
    if keep == 0:
        return np.einsum("ijkj->ik", t)
    if keep == 1:
        return np.einsum("ijil->jl", t)
    raise ValueError(f"keep must be 0 or 1, got {keep}")


def _offdiag_norm(a: np.ndarray) -> float:
    off = a - np.diag(np.diag(a))
    return float(np.linalg.norm(off))


def herm_eig(a, hermitian_tol: float = 1e-8, tol: float = EIG_TOL, max_sweeps: int = 60):
    """Eigen-decomposition of a Hermitian matrix by cyclic complex Jacobi rotations.

    Returns ``(w, v)`` with eigenvalues ``w`` ascending and orthonormal
    eigenvectors in the columns of ``v``.
    """
    a = _square(a)
    if not is_hermitian(a, hermitian_tol):
        raise NotHermitianError("herm_eig requires a Hermitian matrix")
    n = a.shape[0]
    a = 0.5 * (a + a.conj().T)
    v = np.eye(n, dtype=complex)
    scale_ = max(np.max(np.abs(a), initial=0.0), 1.0)

    for _ in range(max_sweeps):
        if _offdiag_norm(a) <= tol * scale_:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                mag = abs(apq)
                if mag <= 1e-300:
                    continue
                phase = apq / mag
                app, aqq = a[p, p].real, a[q, q].real
                tau = (aqq - app) / (2.0 * mag)
                t = (1.0 if tau >= 0 else -1.0) / (abs(tau) + np.hypot(tau, 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                # U = diag(1, conj(phase)) on (p, q), followed by a real rotation
                u = np.eye(n, dtype=complex)
                u[p, p] = c
                u[p, q] = s
                u[q, p] = -s * np.conj(phase)
                u[q, q] = c * np.conj(phase)
                a = u.conj().T @ a @ u
                a[p, q] = a[q, p] = 0.0
                v = v @ u
    else:
        if _offdiag_norm(a) > 1e3 * tol * scale_:
            raise RuntimeError("Jacobi eigensolver did not converge")

    w = np.real(np.diag(a))
    order = np.argsort(w, kind="stable")
    w, v = w[order], v[:, order]
    # fix the global phase of each eigenvector: largest component real positive
    for k in range(n):
        j = int(np.argmax(np.abs(v[:, k])))
        v[:, k] *= np.conj(v[j, k]) / abs(v[j, k])
    return w, v


def normalize(v) -> np.ndarray:
    v = np.asarray(v, dtype=complex).reshape(-1)
    nrm = np.linalg.norm(v)
    if nrm == 0:
        raise InvalidStateError("cannot normalize the zero vector")
    return v / nrm


def check_state(v, tol: float = 1e-12) -> np.ndarray:
    v = np.asarray(v, dtype=complex).reshape(-1)
    if not np.all(np.isfinite(v)):
        raise InvalidStateError("state has non-finite amplitudes")
    if abs(np.vdot(v, v).real - 1.0) > tol:
        raise InvalidStateError("state vector is not normalized")
    return v


def conjugate_state(v) -> np.ndarray:
    """Entrywise complex conjugation in the computational basis."""
    return np.conj(np.asarray(v, dtype=complex))


def ket(bits: str) -> np.ndarray:
    """Computational basis ket, e.g. ``ket("01")`` (second qubit fastest)."""
    v = np.zeros(2 ** len(bits), dtype=complex)
    v[int(bits, 2)] = 1.0
    return v


def projector(v) -> np.ndarray:
    v = np.asarray(v, dtype=complex).reshape(-1)
    return np.outer(v, v.conj())


def check_density(rho, tol: float = VALIDATION_TOL) -> np.ndarray:
    """Validate Hermiticity, positivity and unit trace; return ``rho``."""
    rho = _square(rho)
    if not is_hermitian(rho, tol):
        raise InvalidStateError("density operator is not Hermitian")
    if abs(np.trace(rho) - 1.0) > tol:
        raise InvalidStateError("density operator does not have unit trace")
    w, _ = herm_eig(rho)
    if w[0] < -tol:
        raise InvalidStateError(f"density operator has negative eigenvalue {w[0]:.3e}")
    return rho
