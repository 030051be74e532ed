import numpy as np
import pytest

from ghlab import (
    BasePoint,
    ChartGrid,
    DomainError,
    EndKind,
    ModelEnd,
    SingularGaugeError,
    bogomolny_residual,
    connection_covector,
    ellipticity_bounds,
    geometry_scalars,
    metric_blocks,
    volume_tilde,
)


def make(kind, **kw):
    defaults = dict(c=1.0, k=1, eps=0.5, rho_min=1.0, rho_max=3.0)
    defaults.update(kw)
    return ModelEnd(kind, **defaults)


class TestScalars:
    def test_alf_values(self):
        end = make(EndKind.ALF, k=2, rho_min=0.1)
        s = geometry_scalars(end, BasePoint(np.log(2.0), (np.pi / 2, 0.0)))
        assert s.h == pytest.approx(1.5, abs=1e-14)
        assert s.h_eps == pytest.approx(1.75, abs=1e-14)
        assert s.omega == pytest.approx(0.5 * 1.75 ** -0.5, abs=1e-12)

    def test_alh_values(self):
        end = make(EndKind.ALH, k=3, rho_max=5.0)
        s = geometry_scalars(end, BasePoint(3.0, (0.25, 0.5)))
        assert (s.h, s.h_eps) == (1.0, 1.5)
        assert s.omega == pytest.approx(1.5 ** -0.5, abs=1e-14)
        assert s.rho == 3.0

    def test_alhstar_values(self):
        end = make(EndKind.ALHstar, eps=0.25, rho_max=5.0)
        s = geometry_scalars(end, BasePoint(4.0, (0.25, 0.5)))
        assert s.h == 5.0
        assert s.h_eps == 2.25
        assert s.omega == pytest.approx(2.0 / 3.0, abs=1e-14)

    def test_algstar_h_uses_log_radius(self):
        end = make(EndKind.ALGstar, c=1.0, k=1)
        s = geometry_scalars(end, BasePoint(1.0, (0.0, 0.0)))
        assert s.h == pytest.approx(2.0)  # c + k * log(e)

    def test_scale_consistency(self):
        # omega * e^rho * sqrt(h_eps) = 1 identically on log-radial kinds
        rho = np.linspace(1.0, 3.0, 37)
        for kind in (EndKind.ALF, EndKind.ALG, EndKind.ALGstar):
            end = make(kind, k=2)
            val = end.omega(rho) * np.exp(rho) * np.sqrt(end.h_eps(rho))
            assert np.max(np.abs(val - 1.0)) < 1e-13

    def test_outside_annulus(self):
        end = make(EndKind.ALG)
        with pytest.raises(DomainError):
            geometry_scalars(end, BasePoint(5.0, (0.0, 0.0)))


class TestEndValidation:
    def test_eps_range(self):
        with pytest.raises(DomainError, match=r"\(0,1\)"):
            make(EndKind.ALF, eps=1.5)

    def test_c_positive(self):
        with pytest.raises(DomainError):
            make(EndKind.ALF, c=-1.0)

    def test_torus_base_needs_positive_rho(self):
        with pytest.raises(DomainError, match="rho_min"):
            make(EndKind.ALH, rho_min=0.0)
        make(EndKind.ALG, rho_min=0.0)  # log-radial kinds allow rho = 0

    def test_h_eps_positivity_checked(self):
        with pytest.raises(DomainError, match="h_eps"):
            make(EndKind.ALHstar, k=-3, eps=0.9, rho_min=1.0, rho_max=10.0)

    def test_rho_ordering(self):
        with pytest.raises(DomainError):
            make(EndKind.ALF, rho_min=3.0, rho_max=1.0)


class TestConnection:
    def test_alf_equator(self):
        end = make(EndKind.ALF, k=2)
        A = connection_covector(end, BasePoint(2.0, (np.pi / 2, 0.1)))
        assert A == pytest.approx([0.0, 0.0, 1.0])

    def test_alg_flat(self):
        end = make(EndKind.ALG)
        A = connection_covector(end, BasePoint(2.0, (1.0, 2.0)))
        assert np.all(A == 0.0)

    def test_alhstar_linear(self):
        end = make(EndKind.ALHstar)
        A = connection_covector(end, BasePoint(2.0, (0.3, 0.9)))
        assert A[2] == pytest.approx(0.3)

    def test_alf_pole_singular(self):
        end = make(EndKind.ALF, k=2)
        with pytest.raises(SingularGaugeError):
            connection_covector(end, BasePoint(2.0, (0.0, 0.0)))


class TestMetricBlocks:
    def test_alh_fiber_scalar(self):
        end = make(EndKind.ALH)
        mb = metric_blocks(end, BasePoint(2.0, (0.2, 0.3)), "GH")
        assert mb.fiber_scalar == pytest.approx(0.25 / 1.5, abs=1e-14)

    def test_cf_is_omega2_rescaling(self):
        end = make(EndKind.ALGstar, k=2)
        p = BasePoint(1.5, (1.0, 2.0))
        gh = metric_blocks(end, p, "GH")
        cf = metric_blocks(end, p, "CF")
        w2 = float(end.omega(1.5)) ** 2
        assert cf.fiber_scalar / gh.fiber_scalar == pytest.approx(w2, rel=1e-13)
        assert np.allclose(cf.base_block, w2 * gh.base_block, rtol=1e-13)

    def test_algstar_base_coefficient(self):
        # independent evaluation of h_eps * e^{2 rho}; Table h = c + k log r
        end = make(EndKind.ALGstar, c=1.0, k=1)
        mb = metric_blocks(end, BasePoint(1.0, (0.5, 0.5)), "GH")
        h_eps = 1.0 + 0.5 * (1.0 + 1.0)
        assert mb.base_block[0, 0] == pytest.approx(h_eps * np.e ** 2, rel=1e-13)

    def test_determinant_identity(self):
        for kind in EndKind:
            end = make(kind, k=2)
            p = BasePoint(2.0, (1.0, 0.5))
            mb = metric_blocks(end, p, "GH")
            g1, g2, g3 = (float(v) for v in end.base_metric_diag(2.0, 1.0))
            expect = end.eps ** 2 * float(end.h_eps(2.0)) ** 2 * g1 * g2 * g3
            assert mb.det4() == pytest.approx(expect, rel=1e-12)

    def test_which_validated(self):
        end = make(EndKind.ALH)
        with pytest.raises(ValueError):
            metric_blocks(end, BasePoint(2.0, (0.1, 0.1)), "XX")


class TestVolume:
    def test_alf_density(self):
        end = make(EndKind.ALF, k=2)
        assert volume_tilde(end, BasePoint(2.0, (np.pi / 2, 0.0))) == 1.0

    def test_torus_density(self):
        end = make(EndKind.ALH)
        assert volume_tilde(end, BasePoint(2.0, (0.7, 0.1))) == 1.0

    def test_alg_total_volume(self):
        # closed-form product integral over the annulus [0, 1]
        end = ModelEnd(EndKind.ALG, c=1.0, k=0, eps=0.5, rho_min=0.0,
                       rho_max=1.0)
        grid = ChartGrid(end, 41, 8, 8, 8)
        total = float(np.sum(grid.tilde_cell_weights(include_fiber=True)))
        assert total == pytest.approx((2.0 * np.pi) ** 3, rel=1e-12)


class TestBogomolny:
    def test_analytic_gauges_exact(self):
        for kind in (EndKind.ALG, EndKind.ALGstar, EndKind.ALH, EndKind.ALHstar):
            end = make(kind, k=1)
            grid = ChartGrid(end, 17, 16, 16, 8)
            assert bogomolny_residual(end, grid) < 1e-12

    def test_alf_second_order(self):
        end = make(EndKind.ALF, k=2)
        r1 = bogomolny_residual(end, ChartGrid(end, 17, 16, 8, 8))
        r2 = bogomolny_residual(end, ChartGrid(end, 33, 32, 8, 8))
        assert 3.5 <= r1 / r2 <= 4.5

    def test_h_discretely_harmonic(self):
        # FD base Laplacian annihilates h to O(mesh^2) (exactly on the
        # flat-chart kinds)
        from ghlab import assemble_radial_operator, separated_radial_block

        alf = make(EndKind.ALF, k=2)
        errs = []
        for m in (33, 65):
            rho = np.linspace(1.0, 3.0, m)
            op = assemble_radial_operator(alf, 0.0, 0, 0.0, rho)
            errs.append(np.max(np.abs(op.matrix @ alf.h(rho))))
        assert errs[0] / errs[1] > 3.4

        algstar = make(EndKind.ALGstar)
        rho = np.linspace(1.0, 3.0, 33)
        op = separated_radial_block(algstar, 0.0, 0, 0, 0, rho)
        assert np.max(np.abs(op.matrix @ algstar.h(rho))) < 1e-11


class TestEllipticity:
    def test_symbol_identity(self):
        for kind in EndKind:
            end = make(kind, k=2)
            grid = ChartGrid(end, 9, 8, 8, 8)
            lam, Lam = ellipticity_bounds(end, grid, 0.5)
            assert lam == pytest.approx(1.0, abs=1e-10)
            assert np.isfinite(Lam)

    def test_eps_uniformity(self):
        vals = []
        for eps in (0.5, 0.25, 0.125):
            end = make(EndKind.ALF, k=2, eps=eps)
            grid = ChartGrid(end, 9, 8, 8, 8)
            vals.append(ellipticity_bounds(end, grid, 0.0)[0])
        assert np.max(np.abs(np.diff(vals))) < 1e-12

    def test_delta_independence(self):
        end = make(EndKind.ALG)
        grid = ChartGrid(end, 9, 8, 8, 8)
        lams = [ellipticity_bounds(end, grid, d)[0] for d in (-1.0, 0.0, 1.0)]
        assert np.max(np.abs(np.diff(lams))) < 1e-12
