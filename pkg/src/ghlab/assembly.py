"""Sparse assembly of the weighted operator per circle-fiber Fourier mode.

For a fiber mode ``u(x, t) = u_n(x) exp(i n t)`` the weighted operator

    L_delta = exp(-delta rho) Omega^-2 Laplacian (exp(delta rho) ...)

reduces to an operator on the base,

    L_delta u_n = Pref * [ sum_i G^ii D_i^2 + sum_i c_i D_i
                           + 2 delta G^rr D_rho + (delta^2 G^rr + delta c_rho) ]
                  u_n  -  V u_n,

with ``Pref = Omega^-2 / h_eps``, diagonal inverse base metric ``G``, metric
divergence terms ``c_i = (1/sqrt g) d_i(sqrt g G^ii)``, covariant derivatives
``D_i = d_i - i n a_i`` against the bundle-normalized connection ``a``, and
the fiber potential ``V = n^2 Omega^-2 h_eps / eps^2``.  The weight
conjugation enters analytically through the coefficients (never by
multiplying discrete matrices).

Matrices are assembled with the sign reversed (``P = -L_delta``) so the
principal part is positive; singular values, kernels and residual-against-zero
checks are unaffected and fiber terms appear as positive diagonals.

Magnetic couplings are discretized with link phases (the phase of a stencil
leg is the exact line integral of ``n a`` along it), which makes discrete
gauge covariance exact: shifting the gauge by ``df`` conjugates the interior
matrix by ``diag(exp(i n f))``.  Twisted-periodic seams multiply the wrapped
stencil legs by the mode phases of the grid's :class:`TwistDescriptor`.

The ALF end with ``n != 0`` is never put on an angular grid; it separates
into monopole harmonics with eigenvalues ``l(l+1) - q^2`` (charge
``q = n k / 2``) and a banded radial operator assembled by
:func:`assemble_radial_operator`.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp

from .errors import DomainError, OperatorStateError
from .geometry import EndKind, ModelEnd, bundle_connection_coefficient
from .spaces import ChartGrid, GridFunction

BC_NONE = None
BC_BOTH = "both"
BC_INNER = "inner"


@dataclass(frozen=True)
class ModeOperator:
    """Sparse operator for one fiber mode on the base grid.

    Before boundary reduction the matrix covers every grid node (radial
    boundary planes carry one-sided rows that are replaced on reduction).
    ``ip_weights`` realizes the reference-volume L2 inner product on the
    current unknown set.
    """

    matrix: sp.csr_matrix
    grid: ChartGrid
    n: int
    delta: float
    end: ModelEnd
    bc: str | None
    ip_weights: np.ndarray
    kept: np.ndarray | None = None
    boundary_lift: sp.csr_matrix | None = None
    dropped: np.ndarray | None = None

    @property
    def shape(self):
        return self.matrix.shape

    def export_coo(self, path):
        """Write the matrix in coordinate text format: row col re im."""
        coo = self.matrix.tocoo()
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"# {coo.shape[0]} {coo.shape[1]} {coo.nnz}\n")
            for r, c, v in zip(coo.row, coo.col, coo.data):
                fh.write(f"{r} {c} {v.real:.17g} {v.imag:.17g}\n")


@dataclass(frozen=True)
class RadialOperator:
    """Banded radial operator of one separated angular sector."""

    matrix: sp.csr_matrix
    rho: np.ndarray
    end: ModelEnd
    delta: float
    n: int
    angular_eigenvalue: float
    multiplicity: int
    bc: str | None
    ip_weights: np.ndarray
    boundary_lift: sp.csr_matrix | None = None
    dropped: np.ndarray | None = None
    zeroth_floor: float = -np.inf
    far_coeffs: tuple | None = None
    zeroth_profile: np.ndarray | None = None

    @property
    def shape(self):
        return self.matrix.shape

    def outer_growth_count(self) -> int:
        """Number of discrete characteristic branches at the outer edge
        with |root| > 1 (outward-growing, hence inadmissible on the infinite
        end).  Drives the decay-consistent outer truncation: that many outer
        nodes receive Dirichlet conditions."""
        c2, c1, c0 = self.far_coeffs
        h = self.rho[1] - self.rho[0]
        a = c2 / h ** 2 + c1 / (2 * h)
        b = -2 * c2 / h ** 2 + c0
        c = c2 / h ** 2 - c1 / (2 * h)
        if a == 0:
            return 0
        roots = np.roots([a, b, c])
        return int(np.sum(np.abs(roots) > 1.0))

    def coercivity_bound(self) -> float:
        """Rigorous lower bound on the Dirichlet-reduced sigma_min.

        The symmetric part of the reduced matrix is the positive
        semidefinite second-difference plus the zeroth-order diagonal (the
        constant first-order coefficient is exactly antisymmetric on the
        uniform interior grid), so sigma_min >= max(0, min zeroth coeff).
        """
        return max(0.0, self.zeroth_floor)


# ---------------------------------------------------------------------------
# coefficient fields
# ---------------------------------------------------------------------------

def _coefficient_fields(end: ModelEnd, grid: ChartGrid, n: int):
    """Per-node geometric coefficient arrays over the base grid."""
    R, A1, _ = grid.meshes()
    g1, g2, g3 = end.base_metric_diag(R, A1)
    he = end.h_eps(R)
    om2 = end.omega(R) ** 2
    pref = 1.0 / (om2 * he)
    G = (1.0 / g1, 1.0 / g2, 1.0 / g3)

    zero = np.zeros_like(R)
    if end.kind is EndKind.ALF:
        div = (np.exp(-2.0 * R), np.exp(-2.0 * R) / np.tan(A1), zero)
    elif end.kind in (EndKind.ALG, EndKind.ALGstar):
        div = (zero, zero, zero)
    else:
        div = (zero, zero, zero)

    a2 = n * bundle_connection_coefficient(end, A1)  # covariant coupling n*a
    V = n ** 2 / om2 * he / end.eps ** 2
    return pref, G, div, a2, V


def _axis_pack(shape, axis):
    """Flat node indices and their +/- neighbors along one axis (wrapped)."""
    idx = np.arange(int(np.prod(shape))).reshape(shape)
    return (idx, np.roll(idx, -1, axis=axis), np.roll(idx, 1, axis=axis))


def _seam_masks(shape, axis):
    plus = np.zeros(shape, dtype=bool)
    minus = np.zeros(shape, dtype=bool)
    sl = [slice(None)] * len(shape)
    sl[axis] = -1
    plus[tuple(sl)] = True
    sl[axis] = 0
    minus[tuple(sl)] = True
    return plus, minus


def assemble_mode_operator(end: ModelEnd, grid: ChartGrid, delta: float,
                           n: int, gauge_shift=None) -> ModeOperator:
    """Assemble the mode-n weighted operator on the base grid.

    ``gauge_shift`` is an optional callable f(R, A1, A2) adding the exact
    1-form df to the connection; the interior matrix then equals the
    unshifted one conjugated by diag(exp(i n f)).

    ALF supports only n = 0 here; nonzero ALF modes go through the
    monopole-spectral radial path (:func:`assemble_radial_operator`).
    """
    if end.kind is EndKind.ALF and n != 0:
        raise DomainError(
            "ALF modes with n != 0 separate into monopole harmonics; "
            "use monopole_angular_eigenvalues + assemble_radial_operator")
    if abs(n) > grid.resolvable_band():
        raise DomainError(f"mode {n} outside the grid's resolvable band")

    shape = grid.base_shape
    N = int(np.prod(shape))
    pref, G, div, a2, V = _coefficient_fields(end, grid, n)
    R, A1, A2 = grid.meshes()
    f_shift = gauge_shift(R, A1, A2) if gauge_shift is not None else None

    dtype = float if (n == 0 and f_shift is None) else complex
    rows, cols, vals = [], [], []

    def add(r, c, v):
        rows.append(np.asarray(r).ravel())
        cols.append(np.asarray(c).ravel())
        vals.append(np.asarray(v, dtype=complex).ravel())

    diag_acc = np.zeros(shape, dtype=complex)

    for axis in range(3):
        h = grid.spacings[axis]
        periodic = axis == 2 or (axis == 1 and grid.ang1_periodic)
        idx, idx_p, idx_m = _axis_pack(shape, axis)

        # second- and first-order coefficients of this axis (sign-reversed
        # operator P = -L: negate here once)
        c2 = -(pref * G[axis])
        c1 = -(pref * div[axis])
        if axis == 0:
            c1 = c1 - pref * G[0] * 2.0 * delta
            diag_acc += -(pref * (delta ** 2 * G[0] + delta * div[0]))

        # +link phases exp(-i theta), theta = exact integral of n*a + n*df
        if dtype is complex:
            theta = np.zeros(shape)
            if axis == 2:
                theta = theta + a2 * h
            if f_shift is not None:
                theta = theta + n * (np.roll(f_shift, -1, axis=axis) - f_shift)
            ph_p = np.exp(-1j * theta)
            ph_m = np.conj(np.roll(ph_p, 1, axis=axis))
        else:
            ph_p = np.ones(shape)
            ph_m = np.ones(shape)

        if periodic:
            # twist seam phases multiply the wrapped legs
            if axis == 1:
                seam = grid.twist.ang1_wrap_phase(n, grid.ang2)[None, None, :]
            else:
                seam = grid.twist.ang2_wrap_phase(n, grid.ang1)[None, :, None]
            mask_p, mask_m = _seam_masks(shape, axis)
            ph_p = ph_p * np.where(mask_p, seam, 1.0)
            ph_m = ph_m * np.where(mask_m, np.conj(seam), 1.0)

            add(idx, idx_p, (c2 / h ** 2 + c1 / (2.0 * h)) * ph_p)
            add(idx, idx_m, (c2 / h ** 2 - c1 / (2.0 * h)) * ph_m)
            diag_acc += -2.0 * c2 / h ** 2
        else:
            sl_int = [slice(None)] * 3
            sl_int[axis] = slice(1, -1)
            sl_int = tuple(sl_int)
            add(idx[sl_int], idx_p[sl_int],
                ((c2 / h ** 2 + c1 / (2.0 * h)) * ph_p)[sl_int])
            add(idx[sl_int], idx_m[sl_int],
                ((c2 / h ** 2 - c1 / (2.0 * h)) * ph_m)[sl_int])
            two = np.zeros(shape, dtype=complex)
            two[sl_int] = (-2.0 * c2 / h ** 2)[sl_int]
            diag_acc += two
            # one-sided second-order rows on the first/last plane (phase-free;
            # they are replaced on boundary reduction)
            for row_i, sgn in ((0, 1), (-1, -1)):
                sl = [slice(None)] * 3
                sl[axis] = row_i
                sl = tuple(sl)
                base = idx[sl]
                step = int(np.sign(sgn)) * {0: shape[1] * shape[2],
                                            1: shape[2], 2: 1}[axis]
                d2w = np.array([2.0, -5.0, 4.0, -1.0]) / h ** 2
                d1w = sgn * np.array([-3.0, 4.0, -1.0, 0.0]) / (2.0 * h)
                for kk in range(4):
                    w = c2[sl] * d2w[kk] + c1[sl] * d1w[kk]
                    add(base, base + kk * step, w)

    diag_acc += V - pref * 0.0
    add(np.arange(N), np.arange(N), diag_acc)

    mat = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(N, N))
    mat.sum_duplicates()
    if dtype is float:
        mat = sp.csr_matrix((mat.data.real, mat.indices, mat.indptr), shape=mat.shape)

    w = grid.tilde_cell_weights(include_fiber=False).ravel() * (2.0 * np.pi)
    return ModeOperator(matrix=mat, grid=grid, n=n, delta=float(delta),
                        end=end, bc=BC_NONE, ip_weights=w)


def assemble_base_reduction(end: ModelEnd, grid: ChartGrid,
                            delta: float) -> ModeOperator:
    """The S^1-invariant reduction (real mode-0 operator)."""
    return assemble_mode_operator(end, grid, delta, n=0)


# ---------------------------------------------------------------------------
# the monopole-spectral radial path (ALF) and separated sectors
# ---------------------------------------------------------------------------

def monopole_angular_eigenvalues(n: int, k: int, count: int):
    """Charged-sphere eigenvalues lambda_l = l(l+1) - q^2, q = n k / 2.

    Returns the first ``count`` pairs (lambda, multiplicity 2l+1) starting at
    l = |q|; q is integer or half-integer because n and k are integers.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    q = 0.5 * n * k
    out = []
    l = abs(q)
    for _ in range(count):
        out.append((float(l * (l + 1) - q * q), int(round(2 * l + 1))))
        l += 1.0
    return out


def _radial_matrix(rho, coef2, coef1, coef0):
    """Banded matrix for coef2 d^2 + coef1 d + coef0 with one-sided ends."""
    m = len(rho)
    h = rho[1] - rho[0]
    dtype = complex if np.iscomplexobj(coef0) else float
    M = sp.lil_matrix((m, m), dtype=dtype)
    i = np.arange(1, m - 1)
    M[i, i - 1] = coef2[i] / h ** 2 - coef1[i] / (2 * h)
    M[i, i] = -2.0 * coef2[i] / h ** 2 + coef0[i]
    M[i, i + 1] = coef2[i] / h ** 2 + coef1[i] / (2 * h)
    d2w = np.array([2.0, -5.0, 4.0, -1.0]) / h ** 2
    d1w = np.array([-3.0, 4.0, -1.0, 0.0]) / (2.0 * h)
    for kk in range(4):
        M[0, kk] = coef2[0] * d2w[kk] + coef1[0] * d1w[kk]
        M[m - 1, m - 1 - kk] = coef2[-1] * d2w[kk] - coef1[-1] * d1w[kk]
    M[0, 0] += coef0[0]
    M[m - 1, m - 1] += coef0[-1]
    return M.tocsr()


def _radial_weights(rho):
    h = rho[1] - rho[0]
    w = np.full(len(rho), h)
    w[0] = w[-1] = 0.5 * h
    return w


def assemble_radial_operator(end: ModelEnd, delta: float, n: int,
                             lambda_ang: float, rho) -> RadialOperator:
    """Radial part of the ALF mode operator on one monopole sector.

    P = -[ d^2 + (2 delta + 1) d + delta(delta+1) - lambda_ang
           - n^2 exp(2 rho) h_eps^2 / eps^2 ].
    """
    if end.kind is not EndKind.ALF:
        raise TypeError("the monopole-spectral radial path is ALF-only")
    rho = np.asarray(rho, dtype=float)
    he = end.h_eps(rho)
    V = n ** 2 * np.exp(2.0 * rho) * he ** 2 / end.eps ** 2
    coef2 = -np.ones_like(rho)
    coef1 = -(2.0 * delta + 1.0) * np.ones_like(rho)
    coef0 = -(delta * (delta + 1.0) - lambda_ang) + V
    q = 0.5 * n * end.k
    l = lambda_ang + q * q  # l(l+1); recover multiplicity
    lval = 0.5 * (-1.0 + np.sqrt(1.0 + 4.0 * max(l, 0.0)))
    return RadialOperator(
        matrix=_radial_matrix(rho, coef2, coef1, coef0), rho=rho, end=end,
        delta=float(delta), n=n, angular_eigenvalue=float(lambda_ang),
        multiplicity=int(round(2 * lval + 1)), bc=BC_NONE,
        ip_weights=_radial_weights(rho),
        zeroth_floor=float(np.min(np.real(coef0))),
        far_coeffs=(float(coef2[-1]), float(coef1[-1]), float(np.real(coef0[-1]))),
        zeroth_profile=np.real(np.broadcast_to(coef0, rho.shape)).copy())


def separated_radial_block(end: ModelEnd, delta: float, n: int,
                           m1: int, m2: int, rho) -> RadialOperator:
    """Radial operator of the (m1, m2) angular Fourier sector.

    Exact for every kind at n = 0 and for the untwisted kinds (ALG, ALH) at
    any mode; the starred kinds couple angular sectors for n != 0 and must be
    assembled on the grid instead.
    """
    if end.kind is EndKind.ALF:
        raise TypeError("use assemble_radial_operator for ALF sectors")
    if n != 0 and end.kind in (EndKind.ALGstar, EndKind.ALHstar):
        raise DomainError(
            "twisted kinds do not separate in angular modes for n != 0")
    rho = np.asarray(rho, dtype=float)
    he = end.h_eps(rho)
    if end.kind in (EndKind.ALG, EndKind.ALGstar):
        ang = m1 ** 2 + np.exp(2.0 * rho) * m2 ** 2
        V = n ** 2 * np.exp(2.0 * rho) * he ** 2 / end.eps ** 2
    else:
        ang = (2.0 * np.pi * m1) ** 2 + (2.0 * np.pi * m2) ** 2
        V = n ** 2 * he ** 2 / end.eps ** 2
    coef2 = -np.ones_like(rho)
    coef1 = -2.0 * delta * np.ones_like(rho)
    coef0 = -(delta ** 2 - ang) + V
    mult = (2 if m1 else 1) * (2 if m2 else 1)
    return RadialOperator(
        matrix=_radial_matrix(rho, coef2, coef1, coef0), rho=rho, end=end,
        delta=float(delta), n=n, angular_eigenvalue=float(np.max(ang)),
        multiplicity=mult, bc=BC_NONE, ip_weights=_radial_weights(rho),
        zeroth_floor=float(np.min(np.real(coef0))),
        far_coeffs=(float(coef2[-1]), float(coef1[-1]), float(np.real(coef0[-1]))),
        zeroth_profile=np.real(np.broadcast_to(coef0, rho.shape)).copy())


# ---------------------------------------------------------------------------
# boundary conditions
# ---------------------------------------------------------------------------

def _outer_closure_row(end: ModelEnd, delta: float, rho):
    """Decay-consistent outer row killing the constant harmonic branch.

    Torus-family ends: (u - rho du/d rho)|outer = 0; ALF: (u + du/d rho) = 0.
    Expressed in the conjugated variable v = exp(-delta rho) u and scaled by
    the mesh so its magnitude is comparable to operator rows.
    """
    h = rho[1] - rho[0]
    r2 = rho[-1]
    if end.kind is EndKind.ALF:
        cv, cd = (1.0 + delta), 1.0
    else:
        cv, cd = (1.0 - r2 * delta), -r2
    row = np.zeros(len(rho))
    row[-1] = cv + cd * 3.0 / (2.0 * h)
    row[-2] = cd * (-4.0) / (2.0 * h)
    row[-3] = cd * 1.0 / (2.0 * h)
    return row / h


def apply_dirichlet(op, where: str = "both"):
    """Eliminate Dirichlet boundary unknowns of a mode/radial operator.

    ``both`` removes the inner and outer radial plane; ``inner`` removes the
    inner plane and replaces the outer rows by the decay-consistent closure.
    Returns a new operator carrying the boundary-lift matrix (contribution of
    prescribed boundary values to the reduced right-hand side).
    """
    if where not in (BC_BOTH, BC_INNER):
        raise ValueError(f"where must be 'both' or 'inner', got {where!r}")
    if op.bc is not None:
        raise OperatorStateError("operator is already boundary-reduced")

    if isinstance(op, RadialOperator):
        m = len(op.rho)
        inner = np.array([0])
        outer = np.array([m - 1])
        mat = op.matrix.tolil(copy=True)
        if where == BC_INNER:
            row = _outer_closure_row(op.end, op.delta, op.rho)
            mat[m - 1, :] = row
            drop = inner
        else:
            drop = np.concatenate([inner, outer])
        keep = np.setdiff1d(np.arange(m), drop)
        full = mat.tocsr()
        reduced = full[keep][:, keep]
        lift = full[keep][:, drop]
        return replace(op, matrix=reduced.tocsr(), bc=where,
                       ip_weights=op.ip_weights[keep],
                       boundary_lift=(-lift).tocsr(), dropped=drop)

    grid = op.grid
    shape = grid.base_shape
    idx = np.arange(int(np.prod(shape))).reshape(shape)
    inner = idx[0].ravel()
    outer = idx[-1].ravel()
    mat = op.matrix.tolil(copy=True)
    if where == BC_INNER:
        row = _outer_closure_row(op.end, op.delta, grid.rho)
        nz = np.nonzero(row)[0]
        for flat in outer:
            j = flat % (shape[1] * shape[2])
            mat.rows[flat] = list(idx[nz, j // shape[2], j % shape[2]])
            mat.data[flat] = list(row[nz])
        drop = inner
    else:
        drop = np.concatenate([inner, outer])
    keep = np.setdiff1d(np.arange(int(np.prod(shape))), drop)
    full = mat.tocsr()
    reduced = full[keep][:, keep]
    lift = full[keep][:, drop]
    return replace(op, matrix=reduced.tocsr(), bc=where, kept=keep,
                   ip_weights=op.ip_weights[keep],
                   boundary_lift=(-lift).tocsr(), dropped=drop)


# ---------------------------------------------------------------------------
# adjoint defect and the full four-dimensional operator
# ---------------------------------------------------------------------------

def adjoint_weight(end: ModelEnd, delta: float) -> float:
    """The weight of the formal adjoint: -(delta+1) on R^3 bases, -delta else."""
    return -(delta + 1.0) if end.kind is EndKind.ALF else -delta


def adjoint_defect(end: ModelEnd, grid: ChartGrid, delta: float, n: int,
                   u: GridFunction, v: GridFunction) -> float:
    """|<L_delta u, v> - <u, L_delta* v>| in the reference-volume inner
    product, for mode data supported away from the radial boundary."""
    for w in (u, v):
        if w.mode != n:
            raise DomainError("u, v must be mode-n grid functions")
        if np.max(np.abs(w.values[:2])) > 0 or np.max(np.abs(w.values[-2:])) > 0:
            raise DomainError("support must avoid a two-cell boundary collar")
    P = assemble_mode_operator(end, grid, delta, n)
    Pstar = assemble_mode_operator(end, grid, adjoint_weight(end, delta), n)
    W = P.ip_weights
    uu = u.values.ravel()
    vv = v.values.ravel()
    lhs = np.vdot(vv, W * (P.matrix @ uu))
    rhs = np.vdot(Pstar.matrix @ vv, W * uu)
    return float(abs(lhs - rhs))


def four_dim_apply(end: ModelEnd, grid: ChartGrid):
    """Matrix-free apply of -Omega^-2 Laplacian on full 4D grid data.

    Used for the splitting commutator and the ALF separation cross-check.
    In the Kaluza-Klein frame,

        Laplacian u = h_eps^-1 [ sum_i (G^ii d_i^2 + c_i d_i) u
                                 - 2 G^22 A d_2 d_t u + G^22 A^2 d_t^2 u ]
                      + (h_eps / eps^2) d_t^2 u;

    the connection-divergence d_t term vanishes identically because the
    gauge component depends only on the first angular coordinate.
    """
    R, A1, _ = grid.meshes()
    g1, g2, g3 = end.base_metric_diag(R, A1)
    he = end.h_eps(R)
    om2 = end.omega(R) ** 2
    A = end.conn_coefficient(A1)
    pref = (1.0 / (om2 * he))[..., None]
    G = [(1.0 / g) [..., None] for g in (g1, g2, g3)]
    if end.kind is EndKind.ALF:
        div = [np.exp(-2.0 * R), np.exp(-2.0 * R) / np.tan(A1),
               np.zeros_like(R)]
    else:
        div = [np.zeros_like(R)] * 3
    div = [d[..., None] for d in div]
    Asq = (A ** 2 / g3)[..., None]
    cross = (A / g3)[..., None]
    fiber = (he / (om2 * end.eps ** 2))[..., None]
    hs = grid.spacings

    def d1(vals, axis):
        if axis == 0 or (axis == 1 and not grid.ang1_periodic):
            from .spaces import d_axis
            return d_axis(vals, axis, hs[axis], periodic=False)
        return (np.roll(vals, -1, axis=axis) - np.roll(vals, 1, axis=axis)) \
            / (2.0 * hs[axis])

    def d2(vals, axis):
        if axis == 0 or (axis == 1 and not grid.ang1_periodic):
            def sl(i):
                return tuple([slice(None)] * axis + [i]
                             + [slice(None)] * (vals.ndim - axis - 1))
            out = np.empty_like(vals)
            out[sl(slice(1, -1))] = (
                vals[sl(slice(2, None))] - 2 * vals[sl(slice(1, -1))]
                + vals[sl(slice(0, -2))]) / hs[axis] ** 2
            for edge, order in ((0, 1), (-1, -1)):
                pts = [vals[sl(edge + order * kk)] for kk in range(4)]
                out[sl(edge)] = (2 * pts[0] - 5 * pts[1] + 4 * pts[2]
                                 - pts[3]) / hs[axis] ** 2
            return out
        return (np.roll(vals, -1, axis=axis) - 2 * vals
                + np.roll(vals, 1, axis=axis)) / hs[axis] ** 2

    def apply(vals):
        vals = np.asarray(vals, dtype=complex)
        horiz = sum(G[ax] * d2(vals, ax) + div[ax] * d1(vals, ax)
                    for ax in range(3))
        dt = d1(vals, 3)
        horiz = horiz - 2.0 * cross * d1(dt, 2) + Asq * d2(vals, 3)
        return -(pref * horiz + fiber * d2(vals, 3))

    return apply
