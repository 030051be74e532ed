"""Grids, grid functions, the circle-average splitting and weighted norms.

A :class:`ChartGrid` discretizes the truncated end in chart coordinates
``(rho, ang1, ang2, t)``: the radial grid includes both endpoints, angular
grids are uniform without duplicated seam points, and the fiber grid has
``n_fiber`` points on ``[0, 2 pi)``.  Functions either live on the full 4D
grid or, after extracting one fiber Fourier mode, on the 3D base grid.

Mode-reduced data on the starred kinds is twisted-periodic: wrapping the
first angular coordinate multiplies mode-n values by a phase depending on the
second one (see :class:`TwistDescriptor`).  Wrapping the second coordinate is
always plain periodic; composing the two wraps in either order agrees exactly
because the flux integer ``k`` makes the seam phase single-valued.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BandError, DomainError
from .geometry import EndKind, ModelEnd

ALF_THETA_MARGIN = np.pi / 10.0


@dataclass(frozen=True)
class TwistDescriptor:
    """Seam phases acquired by mode-n data when wrapping periodic directions.

    ALGstar: u_n(rho, theta + 2pi, s) = exp(-i n k s)      * u_n(rho, theta, s)
    ALHstar: u_n(rho, x + 1, y)      = exp(-2 pi i n k y)  * u_n(rho, x, y)

    ALF carries no grid twist (its angular factor is handled spectrally) and
    ALG/ALH are untwisted.  The second-coordinate wrap is always phase-free;
    single-valuedness of the seam phase under that wrap forces integer k.
    """

    kind: EndKind
    k: int

    def ang1_wrap_phase(self, n: int, ang2):
        ang2 = np.asarray(ang2, dtype=float)
        if n == 0:
            return np.ones_like(ang2, dtype=complex)
        if self.kind is EndKind.ALGstar:
            return np.exp(-1j * n * self.k * ang2)
        if self.kind is EndKind.ALHstar:
            return np.exp(-2j * np.pi * n * self.k * ang2)
        return np.ones_like(ang2, dtype=complex)

    def ang2_wrap_phase(self, n: int, ang1):
        return np.ones_like(np.asarray(ang1, dtype=float), dtype=complex)

    def cocycle_defect(self, n: int, ang2_period: float) -> float:
        """Max deviation of the ang1-wrap phase from ang2-periodicity."""
        s = np.linspace(0.0, ang2_period, 17)
        return float(np.max(np.abs(
            self.ang1_wrap_phase(n, s + ang2_period) - self.ang1_wrap_phase(n, s))))


class ChartGrid:
    """Structured grid on the truncated annulus of one model end."""

    def __init__(self, end: ModelEnd, n_rho: int, n_ang1: int, n_ang2: int,
                 n_fiber: int = 8):
        if min(n_rho, n_ang1, n_ang2, n_fiber) < 3:
            raise DomainError("all grid sizes must be >= 3")
        self.end = end
        self.n_rho, self.n_ang1, self.n_ang2, self.n_fiber = (
            int(n_rho), int(n_ang1), int(n_ang2), int(n_fiber))
        self.twist = TwistDescriptor(end.kind, end.k)

        self.rho = np.linspace(end.rho_min, end.rho_max, self.n_rho)
        p1, p2 = end.ang_periods
        if p1 is None:  # ALF polar angle, poles excluded with a margin
            self.ang1 = np.linspace(ALF_THETA_MARGIN, np.pi - ALF_THETA_MARGIN,
                                    self.n_ang1)
            d1 = self.ang1[1] - self.ang1[0]
        else:
            d1 = p1 / self.n_ang1
            self.ang1 = d1 * np.arange(self.n_ang1)
        d2 = p2 / self.n_ang2
        self.ang2 = d2 * np.arange(self.n_ang2)
        self.t = 2.0 * np.pi / self.n_fiber * np.arange(self.n_fiber)
        self.spacings = (self.rho[1] - self.rho[0], d1, d2,
                         2.0 * np.pi / self.n_fiber)

    @property
    def base_shape(self):
        return (self.n_rho, self.n_ang1, self.n_ang2)

    @property
    def shape(self):
        return self.base_shape + (self.n_fiber,)

    @property
    def ang1_periodic(self) -> bool:
        return self.end.ang_periods[0] is not None

    def meshes(self):
        """Broadcast 3D mesh arrays (R, A1, A2) over the base grid."""
        return np.meshgrid(self.rho, self.ang1, self.ang2, indexing="ij")

    def resolvable_band(self) -> int:
        return self.n_fiber // 2 - 1

    def tilde_cell_weights(self, include_fiber: bool):
        """Quadrature weights of the reference volume per grid cell.

        Trapezoid in rho (and theta for ALF, where the density sin(theta)
        is included), plain uniform weights on periodic directions, and
        2*pi/n_fiber per fiber point when ``include_fiber``.
        """
        dr = self.spacings[0]
        w_r = np.full(self.n_rho, dr)
        w_r[0] = w_r[-1] = 0.5 * dr
        if self.ang1_periodic:
            w_1 = np.full(self.n_ang1, self.spacings[1])
        else:
            d1 = self.spacings[1]
            w_1 = np.full(self.n_ang1, d1)
            w_1[0] = w_1[-1] = 0.5 * d1
            w_1 = w_1 * np.sin(self.ang1)
        w_2 = np.full(self.n_ang2, self.spacings[2])
        w = w_r[:, None, None] * w_1[None, :, None] * w_2[None, None, :]
        if include_fiber:
            w = w[..., None] * np.full(self.n_fiber, self.spacings[3])
        return w


class GridFunction:
    """Complex-valued function on a chart grid.

    ``mode is None`` means full 4D data; otherwise the values live on the 3D
    base grid and represent one fiber Fourier mode.  Values are treated as
    immutable after construction.
    """

    def __init__(self, grid: ChartGrid, values, mode: int | None = None):
        values = np.asarray(values)
        expected = grid.base_shape if mode is not None else grid.shape
        if values.shape != expected:
            raise DomainError(
                f"values shape {values.shape} does not match grid {expected}")
        if not np.all(np.isfinite(values)):
            raise DomainError("grid function carries non-finite values")
        self.grid = grid
        self.values = np.array(values, dtype=complex)
        self.values.setflags(write=False)
        self.mode = mode

    # -- serialization (debug dumps; layout documented in the README) -------

    def dump(self, path, fmt: str = "npz"):
        if fmt == "npz":
            np.savez(path, values=self.values,
                     mode=-(10 ** 9) if self.mode is None else self.mode)
            return
        if fmt != "csv":
            raise ValueError(f"unknown dump format {fmt!r}")
        idx = np.indices(self.values.shape).reshape(self.values.ndim, -1)
        flat = self.values.reshape(-1)
        cols = ["i", "j", "l"] + (["m"] if self.mode is None else [])
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(",".join(cols + ["re", "im"]) + "\n")
            for col, v in zip(idx.T, flat):
                fh.write(",".join(str(int(ci)) for ci in col)
                         + f",{v.real:.17g},{v.imag:.17g}\n")


def project_invariant(u: GridFunction) -> GridFunction:
    """Fiber average at each base point, broadcast back along the fiber."""
    if u.mode is not None:
        raise TypeError("project_invariant needs full-grid data, got a single mode")
    mean = u.values.mean(axis=3)
    return GridFunction(u.grid, np.broadcast_to(mean[..., None], u.grid.shape))


def project_oscillatory(u: GridFunction) -> GridFunction:
    if u.mode is not None:
        raise TypeError("project_oscillatory needs full-grid data, got a single mode")
    return GridFunction(u.grid, u.values - u.values.mean(axis=3, keepdims=True))


def mode_extract(u: GridFunction, n: int) -> GridFunction:
    """Fiber Fourier coefficient u_n(x) = (1/2pi) int u exp(-i n t) dt."""
    if u.mode is not None:
        raise TypeError("mode_extract needs full-grid data, got a single mode")
    if abs(n) > u.grid.resolvable_band():
        raise BandError(
            f"mode {n} outside resolvable band |n| <= {u.grid.resolvable_band()}")
    phases = np.exp(-1j * n * u.grid.t)
    coeff = (u.values * phases).mean(axis=3)
    return GridFunction(u.grid, coeff, mode=n)


# ---------------------------------------------------------------------------
# derivatives on the grid
# ---------------------------------------------------------------------------

def _slice_axis(ndim, axis, sl):
    out = [slice(None)] * ndim
    out[axis] = sl
    return tuple(out)


def d_axis(values, axis, spacing, periodic, wrap_phase=None):
    """Second-order first derivative along one axis.

    Periodic axes wrap; when ``wrap_phase`` is given (twisted mode data) the
    values pulled across the seam are multiplied by the phase (forward wrap)
    or its conjugate (backward wrap).  Non-periodic axes use centered stencils
    inside and one-sided second-order stencils at the ends.
    """
    v = values
    nd = v.ndim
    if periodic:
        fwd = np.roll(v, -1, axis=axis)
        bwd = np.roll(v, 1, axis=axis)
        if wrap_phase is not None:
            fwd[_slice_axis(nd, axis, -1)] = (
                fwd[_slice_axis(nd, axis, -1)] * wrap_phase)
            bwd[_slice_axis(nd, axis, 0)] = (
                bwd[_slice_axis(nd, axis, 0)] * np.conj(wrap_phase))
        return (fwd - bwd) / (2.0 * spacing)
    out = np.empty_like(v)
    out[_slice_axis(nd, axis, slice(1, -1))] = (
        v[_slice_axis(nd, axis, slice(2, None))]
        - v[_slice_axis(nd, axis, slice(0, -2))]) / (2.0 * spacing)
    out[_slice_axis(nd, axis, 0)] = (
        -3.0 * v[_slice_axis(nd, axis, 0)] + 4.0 * v[_slice_axis(nd, axis, 1)]
        - v[_slice_axis(nd, axis, 2)]) / (2.0 * spacing)
    out[_slice_axis(nd, axis, -1)] = (
        3.0 * v[_slice_axis(nd, axis, -1)] - 4.0 * v[_slice_axis(nd, axis, -2)]
        + v[_slice_axis(nd, axis, -3)]) / (2.0 * spacing)
    return out


def fiber_derivative(values, axis=3):
    """Spectral d/dt along the periodic fiber axis (exact on the band)."""
    n = values.shape[axis]
    freqs = np.fft.fftfreq(n, d=1.0 / n)  # integer mode numbers
    shape = [1] * values.ndim
    shape[axis] = n
    return np.fft.ifft(np.fft.fft(values, axis=axis)
                       * (1j * freqs.reshape(shape)), axis=axis)


def _frame_gradient(u: GridFunction, v):
    """Conformally orthonormal frame components of the gradient of ``v``.

    Returns a list of arrays (three base directions, plus the fiber direction
    as the last entry).  Mode data differentiates covariantly with the
    bundle-normalized connection; full-grid data uses horizontal lifts with
    the chart gauge.
    """
    from .geometry import bundle_connection_coefficient

    grid, end = u.grid, u.grid.end
    R, A1, _ = grid.meshes()
    g1, g2, g3 = end.base_metric_diag(R, A1)
    he = end.h_eps(R)
    w2 = end.omega(R) ** 2
    cf_diag = [w2 * he * g1, w2 * he * g2, w2 * he * g3]
    cf_fiber = w2 * end.eps ** 2 / he
    comps = []
    if u.mode is None:
        dt = fiber_derivative(v)
        a_chart = end.conn_coefficient(A1)
        for axis in range(3):
            periodic = grid.ang1_periodic if axis == 1 else (axis == 2)
            dv = d_axis(v, axis, grid.spacings[axis],
                        periodic=periodic if axis else False)
            if axis == 2:
                dv = dv - a_chart[..., None] * dt
            comps.append(dv / np.sqrt(cf_diag[axis])[..., None])
        comps.append(dt / np.sqrt(cf_fiber)[..., None])
    else:
        n = u.mode
        a_eff = n * bundle_connection_coefficient(end, A1)
        wrap1 = grid.twist.ang1_wrap_phase(n, grid.ang2)[None, :]
        for axis in range(3):
            if axis == 0:
                dv = d_axis(v, 0, grid.spacings[0], periodic=False)
            elif axis == 1:
                dv = d_axis(v, 1, grid.spacings[1], periodic=grid.ang1_periodic,
                            wrap_phase=wrap1 if grid.ang1_periodic else None)
            else:
                dv = d_axis(v, 2, grid.spacings[2], periodic=True)
                dv = dv - 1j * a_eff * v
            comps.append(dv / np.sqrt(cf_diag[axis]))
        comps.append(1j * n * v / np.sqrt(cf_fiber))
    return comps


def weighted_norm(u: GridFunction, delta: float, kind: str) -> float:
    """Weighted norm of a grid function.

    C0:  max |exp(-delta rho) u|
    L2:  reference-volume L2 norm of exp(-delta rho) u
    W12: adds the conformal gradient energy of the weighted function
    W22: adds iterated orthonormal-frame second derivatives (an equivalent
         stand-in for the covariant Hessian, differing by bounded
         first-order terms)
    """
    if kind not in ("C0", "L2", "W12", "W22"):
        raise ValueError(f"unknown norm kind {kind!r}")
    grid = u.grid
    wr = np.exp(-delta * grid.rho)
    v = u.values * (wr[:, None, None, None] if u.mode is None else wr[:, None, None])
    if kind == "C0":
        return float(np.max(np.abs(v)))
    w = grid.tilde_cell_weights(include_fiber=u.mode is None)
    if u.mode is not None:
        w = w * (2.0 * np.pi)  # fiber integral of |u_n e^{int}|^2
    total = float(np.sum(np.abs(v) ** 2 * w))
    if kind in ("W12", "W22"):
        grads = _frame_gradient(u, v)
        total += sum(float(np.sum(np.abs(g) ** 2 * w)) for g in grads)
    if kind == "W22":
        for g in grads:
            for gg in _frame_gradient(u, g):
                total += float(np.sum(np.abs(gg) ** 2 * w))
    return float(np.sqrt(total))


# ---------------------------------------------------------------------------
# Poincare inequality on the fibers
# ---------------------------------------------------------------------------

def poincare_check(u: GridFunction, end: ModelEnd | None = None) -> float:
    """Worst fiberwise ratio over the stated Poincare bounds.

    For oscillatory data the sup and L2 norms on each circle fiber are
    compared against ``2 pi eps Omega / sqrt(h_eps)`` and
    ``eps Omega / sqrt(h_eps)`` times the matching norm of the differential;
    the return value is the worst ratio divided by its bound (<= 1 up to
    discretization slack).
    """
    if u.mode is not None:
        raise TypeError("poincare_check needs full-grid data")
    end = end or u.grid.end
    vals = u.values
    mean_amp = np.max(np.abs(vals.mean(axis=3)))
    if mean_amp > 1e-12 * max(np.max(np.abs(vals)), 1e-300):
        raise ValueError("input is not fiber-oscillatory (pi_b u != 0)")

    rho = u.grid.rho[:, None, None]
    fiber_len_factor = (end.eps * end.omega(rho)
                        / np.sqrt(end.h_eps(rho)))  # |d/dt|_cf

    dt_vals = fiber_derivative(vals)
    # |du|_cf along the fiber = |u'| / |d/dt|_cf
    du_cf_sup = np.max(np.abs(dt_vals), axis=3) / fiber_len_factor
    sup_u = np.max(np.abs(vals), axis=3)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio_c0 = np.where(du_cf_sup > 0, sup_u / du_cf_sup, 0.0)
    excess_c0 = ratio_c0 / (2.0 * np.pi * fiber_len_factor)

    l2_u = np.sqrt(np.mean(np.abs(vals) ** 2, axis=3))
    l2_du_cf = np.sqrt(np.mean(np.abs(dt_vals) ** 2, axis=3)) / fiber_len_factor
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio_l2 = np.where(l2_du_cf > 0, l2_u / l2_du_cf, 0.0)
    excess_l2 = ratio_l2 / fiber_len_factor

    return float(max(np.max(excess_c0), np.max(excess_l2)))


def random_band_limited(grid: ChartGrid, seed: int, band: int | None = None,
                        oscillatory: bool = True) -> GridFunction:
    """Seeded band-limited trigonometric sample with Gaussian coefficients.

    Coefficients vary smoothly over the base (low-order trigonometric
    profiles), fiber content restricted to 1 <= |n| <= band when oscillatory.
    """
    rng = np.random.default_rng(seed)
    band = band or min(3, grid.resolvable_band())
    R, A1, A2 = grid.meshes()
    L = grid.end.rho_max - grid.end.rho_min
    xi = (R - grid.end.rho_min) / L
    p1 = grid.end.ang_periods[0] or np.pi
    p2 = grid.end.ang_periods[1]

    def smooth_profile():
        out = np.zeros_like(R, dtype=complex)
        for _ in range(3):
            a = rng.standard_normal() + 1j * rng.standard_normal()
            j = rng.integers(0, 3)
            m1 = rng.integers(0, 2)
            m2 = rng.integers(0, 2)
            out += a * np.cos(np.pi * j * xi) \
                * np.cos(2.0 * np.pi * m1 * A1 / p1) \
                * np.cos(2.0 * np.pi * m2 * A2 / p2)
        return out

    t = grid.t
    vals = np.zeros(grid.shape, dtype=complex)
    lo = 1 if oscillatory else 0
    for n in range(lo, band + 1):
        for sgn in ((1, -1) if n else (1,)):
            vals += smooth_profile()[..., None] * np.exp(1j * sgn * n * t)
    return GridFunction(grid, vals)
