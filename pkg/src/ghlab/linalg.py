"""Complex sparse solves, weighted smallest singular values and kernels.

All spectral quantities are measured in the inner product of the diagonal
``ip_weights`` carried by the operators, i.e. as singular values of
``B = W^{1/2} A W^{-1/2}``; the smallest one is the discrete analogue of the
inverse a-priori-estimate constant  inf ||A u||_W / ||u||_W.

Three paths, picked by structure:
  * real banded matrices (the radial sectors): exact banded symmetric
    eigensolve of B^T B, including eigenvectors,
  * small matrices: dense SVD,
  * large sparse: Lanczos on the inverse normal operator through one LU.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import SingularOperatorError
from .spaces import GridFunction

_DENSE_LIMIT = 900
_BAND_LIMIT = 6
_REFINE_STEPS = 3


@dataclass(frozen=True)
class SpectralReport:
    sigma_min: float
    iterations: int
    residual: float
    converged: bool


@dataclass(frozen=True)
class SolveReport:
    residual: float
    refined: int


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _make_solver(A: sp.csc_matrix):
    lu = spla.splu(A)
    real = not np.iscomplexobj(A.data)

    def solve_(b, trans="N"):
        if real:
            if np.iscomplexobj(b):
                return (lu.solve(np.ascontiguousarray(b.real), trans=trans)
                        + 1j * lu.solve(np.ascontiguousarray(b.imag), trans=trans))
            return lu.solve(np.ascontiguousarray(b, dtype=float), trans=trans)
        return lu.solve(np.ascontiguousarray(b, dtype=complex), trans=trans)

    return solve_


def _as_vector(op, rhs):
    if isinstance(rhs, GridFunction):
        if getattr(op, "n", None) is not None and rhs.mode != op.n:
            raise ValueError("rhs mode does not match the operator")
        vec = rhs.values.ravel()
    else:
        vec = np.asarray(rhs).ravel()
    if vec.size == op.shape[0]:
        return vec.astype(complex)
    if getattr(op, "dropped", None) is not None \
            and vec.size == op.shape[0] + len(op.dropped):
        keep = np.setdiff1d(np.arange(vec.size), op.dropped)
        return vec[keep].astype(complex)
    raise ValueError(f"rhs size {vec.size} does not fit operator {op.shape}")


def _wnorm(w, x):
    return float(np.sqrt(np.real(np.vdot(x, w * x))))


def _expand_solution(op, x, boundary_values=None):
    """Scatter a reduced vector back onto the full node set."""
    from .assembly import ModeOperator

    if getattr(op, "dropped", None) is None:
        full = x
    else:
        n_full = op.shape[0] + len(op.dropped)
        full = np.zeros(n_full, dtype=complex)
        keep = np.setdiff1d(np.arange(n_full), op.dropped)
        full[keep] = x
        if boundary_values is not None:
            full[op.dropped] = np.asarray(boundary_values, complex).ravel()
    if isinstance(op, ModeOperator):
        return GridFunction(op.grid, full.reshape(op.grid.base_shape), mode=op.n)
    return full


def _weighted(op):
    d = np.sqrt(np.asarray(op.ip_weights, dtype=float))
    return op.matrix, d


def _bandwidth(A: sp.spmatrix) -> int:
    coo = A.tocoo()
    if coo.nnz == 0:
        return 0
    return int(np.max(np.abs(coo.row - coo.col)))


# ---------------------------------------------------------------------------
# direct solve with certificate
# ---------------------------------------------------------------------------

def solve(op, rhs, boundary_values=None, return_report=False):
    """Direct sparse solve with a weighted residual certificate.

    ``op`` must be boundary-reduced; ``rhs`` may be a mode grid function or a
    plain vector (full-grid or reduced).  Prescribed boundary values are
    folded in through the boundary-lift matrix.  Raises
    :class:`SingularOperatorError` when the certificate
    ||A x - b||_W <= 1e-10 ||b||_W cannot be met.
    """
    if op.bc is None:
        raise ValueError("solve needs a boundary-reduced operator")
    b = _as_vector(op, rhs)
    if boundary_values is not None:
        bv = np.asarray(boundary_values, dtype=complex).ravel()
        b = b + op.boundary_lift @ bv
    A = op.matrix.tocsc()
    w = np.asarray(op.ip_weights, dtype=float)
    bnorm = _wnorm(w, b)
    try:
        lusolve = _make_solver(A)
    except RuntimeError as exc:
        raise SingularOperatorError(f"factorization failed: {exc}",
                                    sigma_min_estimate=0.0) from exc
    x = lusolve(b)
    refined = 0
    res = _wnorm(w, A @ x - b)
    while bnorm > 0 and res > 1e-10 * bnorm and refined < _REFINE_STEPS:
        x = x + lusolve(b - A @ x)
        res = _wnorm(w, A @ x - b)
        refined += 1
    if bnorm > 0 and res > 1e-10 * bnorm:
        est = smallest_singular_value(op).sigma_min
        raise SingularOperatorError(
            f"solve certificate failed (relative residual {res / bnorm:.3e})",
            sigma_min_estimate=est)
    sol = _expand_solution(op, x, boundary_values)
    report = SolveReport(residual=res / bnorm if bnorm else 0.0, refined=refined)
    return (sol, report) if return_report else sol


# ---------------------------------------------------------------------------
# smallest singular values
# ---------------------------------------------------------------------------

def _svd_banded(op, k, want_vectors, want_ref=True):
    """Exact smallest weighted singular pairs of a real banded operator.

    Works on the symmetric augmented pencil [[0, B^T], [B, 0]] (eigenvalues
    +/- sigma) with rows and columns interleaved to keep it banded; this
    avoids the conditioning-squaring of the normal equations and resolves
    near-kernel singular values down to ||B|| * eps.
    """
    A, d = _weighted(op)
    n = A.shape[0]
    B = (sp.diags(d) @ A @ sp.diags(1.0 / d)).tocoo()
    bw = int(np.max(np.abs(B.row - B.col)))
    bands = np.zeros((2 * bw + 2, 2 * n))
    for i, j, v in zip(B.row, B.col, B.data):
        p, q = 2 * i + 1, 2 * j  # row-space slots odd, column-space even
        lo, hi = min(p, q), max(p, q)
        bands[hi - lo, lo] += v
    k = min(k, n - 1)
    # ascending spectrum is (-sigma_n .. -sigma_1, sigma_1 .. sigma_n)
    if want_vectors:
        vals, vecs = sla.eig_banded(bands, lower=True, select="i",
                                    select_range=(n, n + k - 1))
    else:
        vals = sla.eig_banded(bands, lower=True, eigvals_only=True,
                              select="i", select_range=(n, n + k - 1))
        vecs = None
    sig = np.maximum(vals, 0.0)
    if want_ref:
        pos = sla.eig_banded(bands, lower=True, eigvals_only=True,
                             select="i", select_range=(n, 2 * n - 1))
        ref = float(np.median(np.maximum(pos, 0.0)))
    else:
        ref = np.nan
    out_vecs = None
    if want_vectors:
        out_vecs = []
        for j in range(vecs.shape[1]):
            v = vecs[0::2, j]
            nrm = np.linalg.norm(v)
            if nrm == 0:
                v = np.zeros(n)
                v[0] = 1.0
                nrm = 1.0
            out_vecs.append((1.0 / d) * (v / nrm))
    return sig, out_vecs, ref, True


def _svd_dense(op, k, want_vectors, want_ref=True):
    A, d = _weighted(op)
    B = (A.toarray() * (1.0 / d)[None, :]) * d[:, None]
    if want_vectors:
        _, s, vh = np.linalg.svd(B)
        vecs = [(1.0 / d) * vh[len(s) - 1 - j].conj() for j in range(min(k, len(s)))]
    else:
        s = np.linalg.svd(B, compute_uv=False)
        vecs = None
    sig = s[::-1][:k]
    return sig, vecs, float(np.median(s)), True


def _svd_iterative(op, k, want_vectors, want_ref=True):
    A, d = _weighted(op)
    n = A.shape[0]
    lusolve = _make_solver(A.tocsc())
    dinv = 1.0 / d

    def inv_normal(x):
        z = dinv * lusolve(d * x, trans="H")
        return d * lusolve(dinv * z, trans="N")

    Minv = spla.LinearOperator((n, n), matvec=inv_normal, dtype=complex)
    v0 = np.cos(np.linspace(0.0, 3.0, n)) + 0.1
    converged = True
    try:
        vals = spla.eigsh(Minv, k=min(k, n - 2), which="LA", v0=v0,
                          maxiter=600 * k, return_eigenvectors=False)
    except spla.ArpackNoConvergence as exc:
        vals = np.asarray(exc.eigenvalues, dtype=float)
        converged = False
    sig = np.sort(1.0 / np.sqrt(np.maximum(np.sort(vals)[::-1], 1e-300)))
    if len(sig) < k:
        sig = np.concatenate([sig, np.full(k - len(sig), np.nan)])
    rng = np.random.default_rng(0)
    probes = rng.standard_normal((8, n)) + 1j * rng.standard_normal((8, n))
    probes /= np.linalg.norm(probes, axis=1, keepdims=True)
    ref = float(np.median([np.linalg.norm(d * (A @ (dinv * p))) for p in probes]))
    vecs = None
    if want_vectors:
        # deflated inverse iteration for the vectors; the sigmas are then
        # recomputed directly from ||B v|| (no conditioning squaring)
        vecs, basis = [], []
        sig = np.array(sig, dtype=float)
        for j in range(k):
            x = v0 * np.exp(1j * j) / np.linalg.norm(v0)
            for _ in range(160):
                y = inv_normal(x)
                for bvec in basis:
                    y = y - np.vdot(bvec, y) * bvec
                nrm = np.linalg.norm(y)
                if nrm == 0:
                    break
                x = y / nrm
            basis.append(x)
            vecs.append(dinv * x)
            sig[j] = np.linalg.norm(d * (A @ (dinv * x)))
        order = np.argsort(sig)
        sig = sig[order]
        vecs = [vecs[int(i)] for i in order]
    return sig[:k], vecs, ref, converged


def _smallest_svd(op, k, want_vectors, want_ref=True):
    n = op.shape[0]
    A = op.matrix
    if not np.iscomplexobj(A.data) and n > 64 and _bandwidth(A) <= _BAND_LIMIT:
        return _svd_banded(op, k, want_vectors, want_ref)
    if n <= _DENSE_LIMIT:
        return _svd_dense(op, k, want_vectors, want_ref)
    return _svd_iterative(op, k, want_vectors, want_ref)


def smallest_singular_value(op, tol: float = 1e-8) -> SpectralReport:
    """Smallest weighted singular value with a recomputed certificate."""
    if op.bc is None:
        raise ValueError("smallest_singular_value needs a boundary-reduced operator")
    sig, vecs, _, ok = _smallest_svd(op, 1, want_vectors=True, want_ref=False)
    sigma = float(sig[0])
    A, d = _weighted(op)
    v = d * vecs[0]
    v = v / np.linalg.norm(v)
    check = float(np.linalg.norm(d * (A @ ((1.0 / d) * v))))
    res = abs(check - sigma) / max(sigma, 1e-300)
    return SpectralReport(sigma_min=sigma, iterations=0, residual=res,
                          converged=bool(ok and res <= max(100 * tol, 1e-10) * 1.0
                                         or res <= tol))


def smallest_singular_values(op, count: int = 1):
    """Ascending smallest weighted singular values (no vectors)."""
    sig, _, _, ok = _smallest_svd(op, count, want_vectors=False, want_ref=False)
    return sig, ok


def kernel_basis(op, tol: float = 1e-6):
    """Right singular directions with sigma <= tol * sigma_ref, orthonormal
    in the weighted inner product (sigma_ref: median singular value or a
    median-of-probes scale on the iterative path)."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    if op.bc is None:
        raise ValueError("kernel_basis needs a boundary-reduced operator")
    dim, sig, ref, _gap, vecs = _census(op, tol)
    return [_expand_solution(op, v) for v in vecs[:dim]]


def kernel_census(op, tol: float = 1e-6):
    """(dim, smallest sigmas, sigma_ref, gap); gap certifies the count:
    sigma_{dim+1}/sigma_dim for dim >= 1, else sigma_1/(tol*sigma_ref)."""
    dim, sig, ref, gap, _ = _census(op, tol)
    return dim, sig, ref, gap


def _census(op, tol, k: int = 6):
    sig, vecs, ref, _ok = _smallest_svd(op, k, want_vectors=True)
    sig = np.asarray(sig, dtype=float)
    dim = int(np.sum(sig <= tol * ref))
    if dim == 0:
        gap = float(sig[0] / (tol * ref)) if len(sig) else np.inf
    elif dim < len(sig):
        gap = float(sig[dim] / max(sig[dim - 1], 1e-300))
    else:
        gap = np.inf
    return dim, sig, ref, gap, vecs or []


def apriori_sigma_min(op, collar_weights) -> float:
    """Smallest sigma of the map u -> (A u, u|_collar) in weighted norms:

        sigma^2 = lambda_min( B^H B + diag(collar_weights / ip_weights) ),
        B = W^{1/2} A W^{-1/2},

    the discrete analogue of the inverse constant in the a-priori estimate
    ||u|| <= C (||L u|| + ||u||_collar).  The collar term keeps sigma away
    from zero except at indicial weights, so the normal-equations form is
    well conditioned here.
    """
    A, d = _weighted(op)
    n = A.shape[0]
    dc = np.asarray(collar_weights, dtype=float) / (d * d)
    if not np.iscomplexobj(A.data) and n > 64 and _bandwidth(A) <= _BAND_LIMIT:
        B = (sp.diags(d) @ A @ sp.diags(1.0 / d)).tocoo()
        M = (B.T @ B).tocoo()
        bw = int(np.max(np.abs(M.row - M.col)))
        bands = np.zeros((bw + 1, n))
        for r, c, v in zip(M.row, M.col, M.data):
            if r <= c:
                bands[c - r, r] += v
        bands[0] += dc
        val = sla.eig_banded(bands, lower=True, eigvals_only=True,
                             select="i", select_range=(0, 0))
        return float(np.sqrt(max(val[0], 0.0)))
    B = (A.toarray() * (1.0 / d)[None, :]) * d[:, None]
    M = B.conj().T @ B + np.diag(dc)
    val = np.linalg.eigvalsh(0.5 * (M + M.conj().T))[0]
    return float(np.sqrt(max(val, 0.0)))


def load_coo(path) -> sp.csr_matrix:
    """Read a matrix written by ModeOperator.export_coo."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().split()
        rows_n, cols_n = int(header[1]), int(header[2])
        r, c, v = [], [], []
        for line in fh:
            pr, pc, re_, im_ = line.split()
            r.append(int(pr))
            c.append(int(pc))
            v.append(float(re_) + 1j * float(im_))
    return sp.csr_matrix((v, (r, c)), shape=(rows_n, cols_n))
