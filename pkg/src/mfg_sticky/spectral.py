"""Small dense real-matrix machinery.

Characteristic polynomials (Faddeev-LeVerrier), Routh-array counting of
right-half-plane roots, eigendecomposition via companion-matrix root
finding plus inverse iteration, and the boundary-coefficient linear
solve used by both limit solvers.

Everything here is sized for n <= 8; clarity and auditability beat
asymptotics.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateSpectrumError,
    ImaginaryAxisRootError,
    SingularBoundaryError,
)

EIGEN_RESIDUAL_TOL = 1e-9
DEGENERATE_GAP_TOL = 1e-7
BOUNDARY_RANK_TOL = 1e-10


@dataclass(frozen=True)
class RouthVerdict:
    first_column: tuple
    sign_changes: int
    unstable_count: int
    stable_count: int


@dataclass(frozen=True)
class SpectralData:
    """Eigenvalues/eigenvectors of a small real matrix.

    Eigenvalues are sorted by (real part, imaginary part) ascending.
    Conjugate eigenvalues carry exactly conjugate eigenvectors; each
    vector has unit norm with its first nonnegligible component rotated
    real-positive.
    """

    matrix: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns
    stable_count: int

    @property
    def stable_eigenvalues(self):
        return self.eigenvalues[self.eigenvalues.real < 0]

    @property
    def stable_vectors(self):
        return self.eigenvectors[:, self.eigenvalues.real < 0]


def char_poly(matrix):
    """Monic coefficients of det(lambda*I - M), highest degree first.

    Faddeev-LeVerrier recursion; no eigenvalue computation involved, so
    this is an independent route against the eigendecomposition.
    """
    m = np.asarray(matrix, dtype=float)
    n = m.shape[0]
    if m.shape != (n, n):
        raise ValueError("matrix must be square")
    if n > 8:
        raise ValueError("char_poly is limited to n <= 8")
    coeffs = np.zeros(n + 1)
    coeffs[0] = 1.0
    aux = np.zeros_like(m)
    for k in range(1, n + 1):
        aux = m @ aux + coeffs[k - 1] * np.eye(n)
        coeffs[k] = -np.trace(m @ aux) / k
    return coeffs


def routh_count(coeffs):
    """Count open right-half-plane roots via Routh first-column sign changes.

    A zero pivot with a nonzero remainder row gets the classic epsilon
    substitution. A fully vanishing row means roots on the imaginary
    axis and raises IMAGINARY_AXIS_ROOT.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.size < 2 or coeffs[0] == 0:
        raise ValueError("need a nonzero leading coefficient and degree >= 1")
    degree = coeffs.size - 1
    scale = np.max(np.abs(coeffs))
    eps = 1e-9 * scale

    width = (degree // 2) + 1
    rows = np.zeros((degree + 1, width))
    rows[0, : (degree + 2) // 2] = coeffs[0::2]
    rows[1, : (degree + 1) // 2] = coeffs[1::2]
    for i in range(2, degree + 1):
        upper, lower = rows[i - 2], rows[i - 1]
        if np.all(np.abs(lower) <= 1e-14 * scale):
            raise ImaginaryAxisRootError(
                "a Routh row vanished; marginal (imaginary-axis) roots present"
            )
        pivot = lower[0]
        if abs(pivot) <= 1e-14 * scale:
            pivot = eps
        for j in range(width - 1):
            rows[i, j] = (pivot * upper[j + 1] - upper[0] * lower[j + 1]) / pivot
    first = rows[:, 0].copy()
    first[np.abs(first) <= 1e-14 * scale] = eps
    signs = np.sign(first)
    changes = int(np.sum(signs[1:] != signs[:-1]))
    return RouthVerdict(
        first_column=tuple(rows[:, 0]),
        sign_changes=changes,
        unstable_count=changes,
        stable_count=degree - changes,
    )


def _normalize(vec):
    vec = vec / np.linalg.norm(vec)
    idx = int(np.argmax(np.abs(vec) > 1e-8))
    phase = vec[idx] / abs(vec[idx])
    return vec / phase


def _inverse_iteration(m, lam, n_iter=3):
    n = m.shape[0]
    shift = lam + 1e-10 * (1.0 + abs(lam))
    a = m.astype(complex) - shift * np.eye(n)
    vec = np.ones(n, dtype=complex) / np.sqrt(n)
    for _ in range(n_iter):
        try:
            vec = np.linalg.solve(a, vec)
        except np.linalg.LinAlgError:
            a = m.astype(complex) - (shift + 1e-8) * np.eye(n)
            vec = np.linalg.solve(a, vec)
        vec = vec / np.linalg.norm(vec)
    return _normalize(vec)


def eigendecompose(matrix, residual_tol=EIGEN_RESIDUAL_TOL, gap_tol=DEGENERATE_GAP_TOL):
    """Eigenvalues via companion-matrix roots of char_poly, vectors via
    inverse iteration; conjugate pairing enforced by construction."""
    m = np.asarray(matrix, dtype=float)
    n = m.shape[0]
    norm = np.linalg.norm(m) or 1.0

    roots = np.roots(char_poly(m))
    # force near-real roots real, pair the rest as exact conjugates
    imag_tol = 1e-8 * max(1.0, norm)
    cleaned = []
    used = np.zeros(len(roots), dtype=bool)
    order = np.argsort(roots.real)
    for i in order:
        if used[i]:
            continue
        r = roots[i]
        if abs(r.imag) <= imag_tol:
            cleaned.append(complex(r.real, 0.0))
            used[i] = True
            continue
        # find the conjugate partner
        j = int(np.argmin(np.abs(roots - np.conj(r)) + used * 1e18))
        used[i] = used[j] = True
        r = complex(r.real, abs(r.imag))
        cleaned.append(r)
        cleaned.append(np.conj(r))
    lam = np.array(cleaned)
    lam = lam[np.lexsort((lam.imag, lam.real))]

    gaps = np.abs(lam[:, None] - lam[None, :]) + np.eye(n) * 1e18
    if gaps.min() < gap_tol * max(1.0, norm):
        raise DegenerateSpectrumError(
            f"eigenvalue gap {gaps.min():.3e} below tolerance", gap=float(gaps.min())
        )

    vecs = np.zeros((n, n), dtype=complex)
    done = np.zeros(n, dtype=bool)
    for i in range(n):
        if done[i]:
            continue
        v = _inverse_iteration(m, lam[i])
        vecs[:, i] = v
        done[i] = True
        if lam[i].imag != 0:
            j = int(np.argmin(np.abs(lam - np.conj(lam[i])) + done * 1e18))
            vecs[:, j] = np.conj(v)
            done[j] = True

    residuals = np.linalg.norm(m @ vecs - vecs * lam[None, :], axis=0)
    if np.any(residuals > residual_tol * norm * 10):
        raise DegenerateSpectrumError(
            "inverse iteration failed to meet the residual tolerance",
            residual=float(residuals.max()),
        )
    return SpectralData(
        matrix=m,
        eigenvalues=lam,
        eigenvectors=vecs,
        stable_count=int(np.sum(lam.real < 0)),
    )


def boundary_solve(stable_vectors, selector, target, rank_tol=BOUNDARY_RANK_TOL):
    """Coefficients a with sum_i a_i * vec_i[selector] == target.

    ``stable_vectors`` may be a sequence of vectors or a matrix with the
    vectors as columns. Raises SINGULAR_BOUNDARY when the restricted
    vectors are linearly dependent within tolerance.
    """
    if isinstance(stable_vectors, np.ndarray) and stable_vectors.ndim == 2:
        mat = stable_vectors.astype(complex)
    else:
        mat = np.column_stack([np.asarray(v, dtype=complex) for v in stable_vectors])
    selector = list(selector)
    target = np.asarray(target, dtype=complex)
    sub = mat[selector, :]
    if sub.shape[0] != sub.shape[1] or sub.shape[0] != target.size:
        raise ValueError("selector, stable vectors and target sizes must agree")
    svals = np.linalg.svd(sub, compute_uv=False)
    if svals[-1] <= rank_tol * svals[0]:
        raise SingularBoundaryError(
            "restricted stable vectors are linearly dependent",
            condition=float(svals[0] / max(svals[-1], 1e-300)),
        )
    coeffs = np.linalg.solve(sub, target)
    residual = np.linalg.norm(sub @ coeffs - target)
    if residual > 1e-9 * max(1.0, np.linalg.norm(target)):
        raise SingularBoundaryError(
            "boundary solve residual too large", residual=float(residual)
        )
    return coeffs
