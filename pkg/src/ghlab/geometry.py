"""Closed-form geometry of the five collapsing model ends.

Each end is a circle bundle over a flat 3-dimensional base ``B`` carrying the
metric

    g = h_eps * g_B + (eps**2 / h_eps) * eta**2,      h_eps = 1 + eps*h,

where ``h`` is a positive harmonic function on ``B`` and ``eta = dt + A`` is a
connection with curvature ``dA = *dh``.  The five kinds differ in the base and
in ``h``:

    kind     base            h                 radial coordinate rho
    ALF      R^3             c + k/(2 r)       log r
    ALG      R^2 x S^1       c                 log r
    ALGstar  R^2 x S^1       c + k log r       log r
    ALH      R+  x T^2       c                 r
    ALHstar  R+  x T^2       c + k r           r

Chart coordinates are ``(rho, ang1, ang2)`` with the fiber coordinate ``t`` of
period 2*pi:

    ALF          ang1 = theta in (0, pi),   ang2 = phi in [0, 2 pi)
    ALG/ALGstar  ang1 = theta in [0, 2 pi), ang2 = s   in [0, 2 pi)
    ALH/ALHstar  ang1 = x     in [0, 1),    ang2 = y   in [0, 1)

The conformal factor is ``Omega = h_eps**-0.5`` on torus bases and
``exp(-rho) * h_eps**-0.5`` otherwise; all weighted norms are measured against
the uniform reference volume ``Vol~ = d rho ^ Vol_Sigma ^ eta`` whose chart
density is ``sin(theta)`` for ALF and 1 for the other kinds.

The ALF chart is oriented so that the fixed monopole gauge
``A = (k/2)(1 - cos theta) d phi`` satisfies ``dA = *dh`` exactly (orientation
sign -1 relative to the standard (rho, theta, phi) order); the other kinds use
the standard chart orientation.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DomainError, SingularGaugeError


class EndKind(enum.Enum):
    ALF = "ALF"
    ALG = "ALG"
    ALGstar = "ALGstar"
    ALH = "ALH"
    ALHstar = "ALHstar"

    @property
    def torus_base(self) -> bool:
        """True when the base is R+ x T^2 (rho is the flat coordinate)."""
        return self in (EndKind.ALH, EndKind.ALHstar)


# angular chart data: (name1, period1 or None, name2, period2, orientation)
_CHARTS = {
    EndKind.ALF: ("theta", None, "phi", 2.0 * np.pi, -1.0),
    EndKind.ALG: ("theta", 2.0 * np.pi, "s", 2.0 * np.pi, 1.0),
    EndKind.ALGstar: ("theta", 2.0 * np.pi, "s", 2.0 * np.pi, 1.0),
    EndKind.ALH: ("x", 1.0, "y", 1.0, 1.0),
    EndKind.ALHstar: ("x", 1.0, "y", 1.0, 1.0),
}


@dataclass(frozen=True)
class ModelEnd:
    """Parameters of one truncated model end.

    ``c`` is the constant term of the harmonic function, ``k`` the integer
    flux/degree, ``eps`` the collapsing parameter and ``[rho_min, rho_max]``
    the truncated annulus in the radial coordinate.
    """

    kind: EndKind
    c: float = 1.0
    k: int = 1
    eps: float = 0.5
    rho_min: float = 1.0
    rho_max: float = 4.0

    def __post_init__(self):
        if isinstance(self.kind, str):
            object.__setattr__(self, "kind", EndKind[self.kind])
        if not self.c > 0:
            raise DomainError(f"c must be positive, got {self.c}")
        if int(self.k) != self.k:
            raise DomainError(f"k must be an integer, got {self.k}")
        object.__setattr__(self, "k", int(self.k))
        if not 0.0 < self.eps < 1.0:
            raise DomainError(f"eps must lie in (0,1), got {self.eps}")
        if not self.rho_min < self.rho_max:
            raise DomainError(
                f"rho_min < rho_max required, got [{self.rho_min}, {self.rho_max}]")
        if self.kind.torus_base and not self.rho_min > 0:
            raise DomainError(
                f"{self.kind.value} has base R+ x T^2; rho_min must be > 0")
        # h_eps > 0 on the whole annulus; h is monotone in rho so sampling
        # a fine linspace (endpoints included) is conclusive in practice
        rho = np.linspace(self.rho_min, self.rho_max, 257)
        if np.min(1.0 + self.eps * self.h(rho)) <= 0.0:
            raise DomainError("h_eps = 1 + eps*h is not positive on the annulus")

    # -- scalar fields -----------------------------------------------------

    def h(self, rho):
        """Harmonic function of Table conditions, evaluated at rho."""
        rho = np.asarray(rho, dtype=float)
        if self.kind is EndKind.ALF:
            return self.c + 0.5 * self.k * np.exp(-rho)
        if self.kind is EndKind.ALG:
            return self.c + 0.0 * rho
        if self.kind is EndKind.ALGstar:
            return self.c + self.k * rho          # k * log r with rho = log r
        if self.kind is EndKind.ALH:
            return self.c + 0.0 * rho
        return self.c + self.k * rho              # ALHstar: k * r with rho = r

    def dh_drho(self, rho):
        rho = np.asarray(rho, dtype=float)
        if self.kind is EndKind.ALF:
            return -0.5 * self.k * np.exp(-rho)
        if self.kind in (EndKind.ALG, EndKind.ALH):
            return 0.0 * rho
        return self.k + 0.0 * rho

    def h_eps(self, rho):
        return 1.0 + self.eps * self.h(rho)

    def omega(self, rho):
        """Conformal factor Omega."""
        he = self.h_eps(rho)
        if self.kind.torus_base:
            return he ** -0.5
        return np.exp(-np.asarray(rho, dtype=float)) * he ** -0.5

    # -- chart description -------------------------------------------------

    @property
    def ang_names(self):
        c = _CHARTS[self.kind]
        return (c[0], c[2])

    @property
    def ang_periods(self):
        """(period1, period2); period1 is None for the ALF polar angle."""
        c = _CHARTS[self.kind]
        return (c[1], c[3])

    @property
    def orientation(self) -> float:
        return _CHARTS[self.kind][4]

    def base_metric_diag(self, rho, ang1):
        """Diagonal of g_B over (d rho, d ang1, d ang2) at chart points."""
        rho = np.asarray(rho, dtype=float)
        ang1 = np.asarray(ang1, dtype=float)
        one = np.ones(np.broadcast(rho, ang1).shape)
        if self.kind is EndKind.ALF:
            e2 = np.exp(2.0 * rho) * one
            return e2, e2, e2 * np.sin(ang1) ** 2
        if self.kind in (EndKind.ALG, EndKind.ALGstar):
            e2 = np.exp(2.0 * rho) * one
            return e2, e2, one
        return one, one.copy(), one.copy()

    def contains(self, rho) -> bool:
        rho = np.asarray(rho, dtype=float)
        return bool(np.all(rho >= self.rho_min) and np.all(rho <= self.rho_max))

    # -- connection ---------------------------------------------------------

    def conn_coefficient(self, ang1):
        """Component A_{ang2} of the fixed gauge eta = dt + A.

        ALF: (k/2)(1 - cos theta); ALGstar: k*theta; ALHstar: k*x; zero for
        ALG and ALH.  The remaining chart components of A vanish.
        """
        ang1 = np.asarray(ang1, dtype=float)
        if self.kind is EndKind.ALF:
            return 0.5 * self.k * (1.0 - np.cos(ang1))
        if self.kind is EndKind.ALGstar:
            return float(self.k) * ang1
        if self.kind is EndKind.ALHstar:
            return float(self.k) * ang1
        return 0.0 * ang1


@dataclass(frozen=True)
class BasePoint:
    """A point of the base in chart coordinates (rho, ang1, ang2)."""

    rho: float
    ang: tuple

    def __post_init__(self):
        if len(self.ang) != 2:
            raise DomainError("ang must carry exactly two angular coordinates")


class GeometryScalars(NamedTuple):
    h: float
    h_eps: float
    omega: float
    rho: float


@dataclass(frozen=True)
class MetricBlocks:
    """g = base_block_ij dx^i dx^j + fiber_scalar * eta^2, eta = dt + conn."""

    base_block: np.ndarray
    fiber_scalar: float
    conn: np.ndarray

    def det4(self) -> float:
        """Determinant of the full 4x4 metric assembled from the blocks."""
        g = np.zeros((4, 4))
        g[:3, :3] = self.base_block + self.fiber_scalar * np.outer(self.conn, self.conn)
        g[:3, 3] = g[3, :3] = self.fiber_scalar * self.conn
        g[3, 3] = self.fiber_scalar
        return float(np.linalg.det(g))


def _check_point(end: ModelEnd, p: BasePoint):
    if not end.contains(p.rho):
        raise DomainError(
            f"rho={p.rho} outside annulus [{end.rho_min}, {end.rho_max}]")
    if end.kind is EndKind.ALF and not 0.0 <= p.ang[0] <= np.pi:
        raise DomainError(f"theta={p.ang[0]} outside [0, pi]")


def geometry_scalars(end: ModelEnd, p: BasePoint) -> GeometryScalars:
    """Evaluate (h, h_eps, omega, rho) at a base point."""
    _check_point(end, p)
    return GeometryScalars(
        h=float(end.h(p.rho)),
        h_eps=float(end.h_eps(p.rho)),
        omega=float(end.omega(p.rho)),
        rho=float(p.rho),
    )


def connection_covector(end: ModelEnd, p: BasePoint) -> np.ndarray:
    """Chart components (A_rho, A_ang1, A_ang2) of the fixed gauge.

    Satisfies dA = *dh in the oriented chart of the end.  The ALF gauge is
    singular at the poles theta in {0, pi}.
    """
    _check_point(end, p)
    if end.kind is EndKind.ALF:
        theta = p.ang[0]
        if min(abs(theta), abs(np.pi - theta)) < 1e-12:
            raise SingularGaugeError(
                f"ALF gauge is singular at theta={theta}; stay away from the poles")
    return np.array([0.0, 0.0, float(end.conn_coefficient(p.ang[0]))])


def metric_blocks(end: ModelEnd, p: BasePoint, which: str = "GH") -> MetricBlocks:
    """Metric blocks of the model metric (``GH``) or its conformal rescaling
    (``CF``, multiplied by omega**2)."""
    _check_point(end, p)
    if which not in ("GH", "CF"):
        raise ValueError(f"which must be 'GH' or 'CF', got {which!r}")
    g1, g2, g3 = end.base_metric_diag(p.rho, p.ang[0])
    he = float(end.h_eps(p.rho))
    base = he * np.diag([float(g1), float(g2), float(g3)])
    fiber = end.eps ** 2 / he
    if which == "CF":
        w2 = float(end.omega(p.rho)) ** 2
        base = w2 * base
        fiber = w2 * fiber
    conn = np.array([0.0, 0.0, float(end.conn_coefficient(p.ang[0]))])
    return MetricBlocks(base_block=base, fiber_scalar=float(fiber), conn=conn)


def volume_tilde(end: ModelEnd, p: BasePoint) -> float:
    """Chart density of the reference volume d rho ^ Vol_Sigma ^ eta."""
    _check_point(end, p)
    if end.kind is EndKind.ALF:
        return float(np.sin(p.ang[0]))
    return 1.0


def volume_tilde_grid(end: ModelEnd, rho, ang1):
    """Vectorized reference-volume density over chart arrays."""
    shape = np.broadcast(np.asarray(rho, float), np.asarray(ang1, float)).shape
    if end.kind is EndKind.ALF:
        return np.broadcast_to(np.sin(np.asarray(ang1, float)), shape).copy()
    return np.ones(shape)


# ---------------------------------------------------------------------------
# Bogomolny identity dA = *dh
# ---------------------------------------------------------------------------

def _d_rho(f, drho):
    """Centered second-order d/d rho along axis 0, one-sided at the ends."""
    out = np.empty_like(f)
    out[1:-1] = (f[2:] - f[:-2]) / (2.0 * drho)
    out[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * drho)
    out[-1] = (3.0 * f[-1] - 4.0 * f[-2] + f[-3]) / (2.0 * drho)
    return out


def _d_ang(f, axis, spacing, periodic):
    if periodic:
        return (np.roll(f, -1, axis=axis) - np.roll(f, 1, axis=axis)) / (2.0 * spacing)
    out = np.empty_like(f)
    lo = [slice(None)] * f.ndim

    def sl(i):
        s = list(lo)
        s[axis] = i
        return tuple(s)

    inner = list(lo)
    inner[axis] = slice(1, -1)
    up = list(lo)
    up[axis] = slice(2, None)
    dn = list(lo)
    dn[axis] = slice(0, -2)
    out[tuple(inner)] = (f[tuple(up)] - f[tuple(dn)]) / (2.0 * spacing)
    out[sl(0)] = (-3.0 * f[sl(0)] + 4.0 * f[sl(1)] - f[sl(2)]) / (2.0 * spacing)
    out[sl(-1)] = (3.0 * f[sl(-1)] - 4.0 * f[sl(-2)] + f[sl(-3)]) / (2.0 * spacing)
    return out


def bogomolny_residual(end: ModelEnd, grid) -> float:
    """Max-norm of dA - *dh over the grid, derivatives by finite differences.

    The comparison is componentwise in the 2-form basis
    (d ang1 ^ d ang2, d ang2 ^ d rho, d rho ^ d ang1).
    """
    R, A1, _ = grid.meshes()
    h = np.broadcast_to(end.h(R[:, :, 0])[..., None], R.shape)
    a_coeff = np.broadcast_to(end.conn_coefficient(A1), R.shape)

    g1, g2, g3 = end.base_metric_diag(R, A1)
    sqrtg = np.sqrt(g1 * g2 * g3)
    sign = end.orientation

    p1, p2 = end.ang_periods
    dh_rho = _d_rho(h, grid.spacings[0])
    dh_a1 = _d_ang(h, 1, grid.spacings[1], periodic=p1 is not None)
    dh_a2 = _d_ang(h, 2, grid.spacings[2], periodic=True)

    # *dh in the (ang1^ang2, ang2^rho, rho^ang1) basis
    star = (
        sign * sqrtg / g1 * dh_rho,
        sign * sqrtg / g2 * dh_a1,
        sign * sqrtg / g3 * dh_a2,
    )
    # dA for A = a_coeff(ang1) d ang2; the gauge lives on the chart (it need
    # not close up around periodic directions), so its derivatives use the
    # non-periodic stencils
    dA = (
        _d_ang(a_coeff, 1, grid.spacings[1], periodic=False),
        -_d_rho(a_coeff, grid.spacings[0]),
        np.zeros_like(a_coeff),
    )
    return float(max(np.max(np.abs(d - s)) for d, s in zip(dA, star)))


# ---------------------------------------------------------------------------
# Ellipticity of the weighted operator
# ---------------------------------------------------------------------------

def ellipticity_bounds(end: ModelEnd, grid, delta: float):
    """(lambda, Lambda) of the weighted operator over the grid.

    ``lambda`` is the smallest eigenvalue of the principal symbol expressed in
    conformally orthonormal frames (analytically the identity, so the value
    flags assembly errors); ``Lambda`` bounds the magnitude of the lower-order
    coefficients in the same frames.
    """
    lam = np.inf
    Lam = 0.0
    rho_line = grid.rho
    a1_line = grid.ang1
    sample_r = rho_line[:: max(1, len(rho_line) // 8)]
    sample_a = a1_line[:: max(1, len(a1_line) // 8)]
    for rho in sample_r:
        for a1 in sample_a:
            p = BasePoint(float(rho), (float(a1), 0.0))
            blocks = metric_blocks(end, p, which="GH")
            # full 4x4 inverse metric, then Omega^-2 g^{mu nu}
            g = np.zeros((4, 4))
            g[:3, :3] = blocks.base_block + blocks.fiber_scalar * np.outer(
                blocks.conn, blocks.conn)
            g[:3, 3] = g[3, :3] = blocks.fiber_scalar * blocks.conn
            g[3, 3] = blocks.fiber_scalar
            ginv = np.linalg.inv(g)
            w2 = float(end.omega(rho)) ** 2
            symb = ginv / w2
            # conformal orthonormal frame: g_cf = w2 * g, so the frame matrix
            # F satisfies F^T (w2 g) F = I; the symbol in the frame is
            # F^T-dual: S = E symb E^T with E = F^{-1}-dual = chol(w2 g)^T
            L = np.linalg.cholesky(w2 * g)
            S = L.T @ symb @ L
            ev = np.linalg.eigvalsh(0.5 * (S + S.T))
            lam = min(lam, float(ev[0]))

            # lower-order coefficients of the S^1-invariant reduction in the
            # cf frame (first-order: metric divergence + weight conjugation)
            he = float(end.h_eps(rho))
            pref = 1.0 / w2 / he
            g1, g2, g3 = (float(v) for v in end.base_metric_diag(rho, a1))
            if end.kind is EndKind.ALF:
                div_terms = (np.exp(-2.0 * rho) * (1.0 + 2.0 * delta),
                             np.exp(-2.0 * rho) / np.tan(a1) if 0 < a1 < np.pi else 0.0,
                             0.0)
            elif end.kind in (EndKind.ALG, EndKind.ALGstar):
                div_terms = (np.exp(-2.0 * rho) * 2.0 * delta, 0.0, 0.0)
            else:
                div_terms = (2.0 * delta, 0.0, 0.0)
            cf_diag = (w2 * he * g1, w2 * he * g2, w2 * he * g3)
            for b, gcf in zip(div_terms, cf_diag):
                Lam = max(Lam, abs(pref * (b + (2.0 * delta / g1 if b is div_terms[0]
                                                else 0.0))) * np.sqrt(gcf))
            c0 = pref * (delta ** 2 / g1 + delta * div_terms[0])
            Lam = max(Lam, abs(c0), 1.0)
    if lam <= 0:
        raise AssertionError(
            f"principal symbol lost positivity (lambda={lam}); assembly bug")
    return float(lam), float(Lam)


def bundle_connection_coefficient(end: ModelEnd, ang1):
    """Component a_{ang2} of the connection driving mode-n covariant
    derivatives (mode n couples to n*a).

    This normalization carries integer flux quanta per compact 2-cycle, so
    the twisted-periodic seam phases of :class:`~ghlab.spaces.TwistDescriptor`
    close up exactly:

        ALF      a = (k/2)(1 - cos theta) d phi   (equals the chart gauge;
                                                   flux 2 pi k through S^2)
        ALGstar  a = -(k / 2 pi) theta d s        (theta-wrap jump -k ds)
        ALHstar  a = -2 pi k x d y                (x-wrap jump -2 pi k dy)
        ALG/ALH  a = 0

    The chart gauges returned by :func:`connection_covector` satisfy
    dA = *dh instead; for the starred torus kinds the two differ by the
    2 pi normalization of the canonical angular domains.
    """
    ang1 = np.asarray(ang1, dtype=float)
    if end.kind is EndKind.ALF:
        return 0.5 * end.k * (1.0 - np.cos(ang1))
    if end.kind is EndKind.ALGstar:
        return -(end.k / (2.0 * np.pi)) * ang1
    if end.kind is EndKind.ALHstar:
        return -2.0 * np.pi * end.k * ang1
    return 0.0 * ang1


def analytic_harmonics(end: ModelEnd):
    """Named harmonic profiles of the S^1-invariant model operator.

    Returns a dict name -> callable(rho).  All are annihilated by the
    weighted operator at delta = 0.
    """
    out = {"one": lambda rho: np.ones_like(np.asarray(rho, dtype=float))}
    if end.kind is EndKind.ALF:
        out["exp(-rho)"] = lambda rho: np.exp(-np.asarray(rho, dtype=float))
    else:
        out["rho"] = lambda rho: np.asarray(rho, dtype=float).copy()
    out["h"] = lambda rho: end.h(rho)
    return out
