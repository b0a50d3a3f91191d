"""Vectorized Liouville-space algebra and the projected-generator spectrum test.

The Liouvillian here is the frequency-convention commutator map
L X = [H, X], represented on column-stacked vectors as
L_mat = 1 (x) H - H^T (x) 1.  It is self-adjoint in the Hilbert-Schmidt
inner product <<A, B>> = Tr[A^dag B] even though it generates dynamics only
after multiplication by -i.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .models import JointHamiltonian

DEFAULT_REALITY_THRESHOLD = 1e-10
DEFAULT_SUPERDIM_CAP = 1764  # 42^2; raisable for larger joint spaces


class EigensolverError(RuntimeError):
    """Dense eigendecomposition failed; the offending matrix is attached."""

    def __init__(self, message, matrix):
        super().__init__(message)
        self.matrix = matrix


class DimensionCapError(ValueError):
    def __init__(self, d, cap):
        super().__init__(f"superoperator dimension {d}^2 = {d*d} exceeds cap {cap}; "
                         "raise superdim_cap to proceed")
        self.dim = d
        self.cap = cap


@dataclass(frozen=True)
class SuperOperator:
    """Dense matrix acting on column-stacked density matrices."""

    matrix: np.ndarray
    dims: tuple[int, int]
    label: str = ""

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        d = self.dims[0] * self.dims[1]
        if m.shape != (d * d, d * d):
            raise ValueError("superoperator must be d^2 x d^2 for d = ds*db")
        object.__setattr__(self, "matrix", m)

    def __matmul__(self, other):
        if isinstance(other, SuperOperator):
            return SuperOperator(self.matrix @ other.matrix, self.dims,
                                 f"{self.label}@{other.label}")
        return self.matrix @ other

    def apply(self, rho):
        """Act on a density matrix given in matrix form."""
        d = self.dims[0] * self.dims[1]
        return (self.matrix @ np.asarray(rho, dtype=complex).reshape(-1, order="F")
                ).reshape((d, d), order="F")


@dataclass(frozen=True)
class SpectrumReport:
    """Eigenstructure summary of the projected generator Q L Q."""

    eigenvalues: np.ndarray
    max_abs_imag: float
    nonhermiticity_frobenius: float
    eigvec_condition: float
    projector_idempotency_error: float
    projector_nonorthogonality: float
    reality_threshold: float = DEFAULT_REALITY_THRESHOLD

    @property
    def is_real(self):
        return self.max_abs_imag < self.reality_threshold

    @property
    def status(self):
        return "real" if self.is_real else "complex"

    def csv_row(self, **leading):
        """Row dict matching the tabulated columns of the spectrum sweeps."""
        row = dict(leading)
        row.update({
            "dim": int(round(np.sqrt(self.eigenvalues.size))),
            "nonhermiticity": self.nonhermiticity_frobenius,
            "max_abs_imag": self.max_abs_imag,
            "eigvec_condition": self.eigvec_condition,
            "status": self.status,
        })
        return row


def _as_matrix(h):
    return h.matrix if isinstance(h, JointHamiltonian) else np.asarray(h, dtype=complex)


def liouvillian_matrix(h) -> SuperOperator:
    """Commutator superoperator of a joint Hamiltonian, column-stacking basis."""
    if isinstance(h, JointHamiltonian):
        mat, dims = h.matrix, h.dims
    else:
        mat = np.asarray(h, dtype=complex)
        dims = (1, mat.shape[0])
    d = mat.shape[0]
    lmat = np.kron(np.eye(d), mat) - np.kron(mat.T, np.eye(d))
    return SuperOperator(lmat, dims, "liouvillian")


def system_liouvillian(h_s) -> np.ndarray:
    """Commutator matrix [H_s, .] for a bare system Hamiltonian (plain array)."""
    h_s = np.asarray(h_s, dtype=complex)
    d = h_s.shape[0]
    return np.kron(np.eye(d), h_s) - np.kron(h_s.T, np.eye(d))


def nz_projection(rho_ref, dims) -> tuple[SuperOperator, SuperOperator]:
    """Projection P X = Tr_b[X] (x) rho_ref and its complement Q = 1 - P.

    In the vectorized basis the matrix elements are
    P_{(an)(bm),(a'k)(b'k')} = delta_aa' delta_bb' delta_kk' rho_ref[n, m];
    P is idempotent but not Hermitian unless rho_ref is maximally mixed.
    """
    ds, db = dims
    rho_ref = np.asarray(rho_ref, dtype=complex)
    if rho_ref.shape != (db, db):
        raise ValueError("reference state dimension mismatch")
    if abs(np.trace(rho_ref) - 1.0) > 1e-10:
        raise ValueError("reference state must have unit trace")
    d = ds * db
    p = np.zeros((d * d, d * d), dtype=complex)
    ns, ms = np.nonzero(rho_ref)
    for alpha in range(ds):
        for beta in range(ds):
            for n, m in zip(ns, ms):
                ridx = (beta * db + m) * d + (alpha * db + n)
                for k in range(db):
                    cidx = (beta * db + k) * d + (alpha * db + k)
                    p[ridx, cidx] += rho_ref[n, m]
    q = np.eye(d * d, dtype=complex) - p
    return (SuperOperator(p, dims, "projection_P"),
            SuperOperator(q, dims, "complement_Q"))


def qlq_spectrum(h: JointHamiltonian, rho_ref,
                 reality_threshold: float = DEFAULT_REALITY_THRESHOLD,
                 superdim_cap: int = DEFAULT_SUPERDIM_CAP) -> SpectrumReport:
    """Full eigendecomposition of the projected generator Q L Q.

    Reports max |Im eigenvalue| (classification against the reality
    threshold), the Frobenius nonhermiticity of Q L Q, the eigenvector-matrix
    condition number, and the projector health numbers.
    """
    d = h.dim
    if d ** 2 > superdim_cap:
        raise DimensionCapError(d, superdim_cap)
    lmat = liouvillian_matrix(h)
    p, q = nz_projection(rho_ref, h.dims)
    m = q.matrix @ lmat.matrix @ q.matrix
    try:
        eigvals, eigvecs = np.linalg.eig(m)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - numpy rarely fails here
        raise EigensolverError(str(exc), m) from exc
    return SpectrumReport(
        eigenvalues=eigvals,
        max_abs_imag=float(np.abs(eigvals.imag).max()),
        nonhermiticity_frobenius=float(np.linalg.norm(m - m.conj().T)),
        eigvec_condition=float(np.linalg.cond(eigvecs)),
        projector_idempotency_error=float(np.linalg.norm(p.matrix @ p.matrix - p.matrix)),
        projector_nonorthogonality=float(np.linalg.norm(p.matrix - p.matrix.conj().T)),
        reality_threshold=reality_threshold,
    )


def vacuum_reference(db: int) -> np.ndarray:
    rho = np.zeros((db, db), dtype=complex)
    rho[0, 0] = 1.0
    return rho
