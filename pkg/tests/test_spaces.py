import numpy as np
import pytest

from ghlab import (
    BandError,
    ChartGrid,
    EndKind,
    GridFunction,
    ModelEnd,
    TwistDescriptor,
    mode_extract,
    poincare_check,
    project_invariant,
    project_oscillatory,
    random_band_limited,
    weighted_norm,
)


@pytest.fixture
def grid():
    end = ModelEnd(EndKind.ALH, c=1.0, k=0, eps=0.5, rho_min=1.0, rho_max=3.0)
    return ChartGrid(end, 9, 6, 6, 32)


def fiberize(grid, profile):
    return GridFunction(grid, np.broadcast_to(profile, grid.shape))


class TestSplitting:
    def test_mean_of_sine_vanishes(self, grid):
        u = fiberize(grid, np.sin(grid.t))
        assert np.max(np.abs(project_invariant(u).values)) < 1e-14

    def test_fiber_constant_fixed_point(self, grid):
        base = np.cos(grid.rho)[:, None, None, None] * np.ones(grid.shape)
        u = GridFunction(grid, base)
        assert np.max(np.abs(project_invariant(u).values - base)) < 1e-14

    def test_linearity_split(self, grid):
        f = np.sin(grid.rho)[:, None, None, None]
        vals = np.broadcast_to(f + np.cos(grid.t)[None, None, None, :],
                               grid.shape)
        u = GridFunction(grid, vals)
        pb = project_invariant(u)
        pf = project_oscillatory(u)
        assert np.max(np.abs(pb.values - f * np.ones(grid.shape))) < 1e-13
        assert np.max(np.abs(pf.values - np.cos(grid.t))) < 1e-13

    def test_idempotent_and_complementary(self, grid):
        u = random_band_limited(grid, seed=0, oscillatory=False)
        pb = project_invariant(u)
        assert np.max(np.abs(project_invariant(pb).values - pb.values)) < 1e-13
        pf = project_oscillatory(u)
        assert np.max(np.abs(project_invariant(pf).values)) < 1e-13

    def test_contraction_bounds(self, grid):
        for seed in range(5):
            u = random_band_limited(grid, seed=seed, oscillatory=False)
            for kind in ("C0", "L2"):
                nu = weighted_norm(u, 0.0, kind)
                npb = weighted_norm(project_invariant(u), 0.0, kind)
                npf = weighted_norm(project_oscillatory(u), 0.0, kind)
                assert npb <= nu * (1 + 1e-12)
                assert npf <= 2 * nu * (1 + 1e-12)

    def test_mode_reduced_input_rejected(self, grid):
        m = mode_extract(random_band_limited(grid, seed=1, oscillatory=False), 1)
        with pytest.raises(TypeError):
            project_invariant(m)
        with pytest.raises(TypeError):
            project_oscillatory(m)


class TestModeExtract:
    def test_pure_mode(self, grid):
        u = fiberize(grid, np.exp(1j * grid.t))
        assert np.max(np.abs(mode_extract(u, 1).values - 1.0)) < 1e-13
        assert np.max(np.abs(mode_extract(u, 2).values)) < 1e-13

    def test_mode_zero_equals_average(self, grid):
        u = random_band_limited(grid, seed=2, oscillatory=False)
        m0 = mode_extract(u, 0)
        pb = project_invariant(u)
        assert np.max(np.abs(m0.values - pb.values[..., 0])) < 1e-13

    def test_parseval(self, grid):
        u = random_band_limited(grid, seed=3, band=5, oscillatory=False)
        band = grid.resolvable_band()
        lhs = sum(2 * np.pi * np.sum(np.abs(mode_extract(u, n).values) ** 2)
                  for n in range(-band, band + 1))
        # modes band+1 .. n_fiber/2 alias; random_band_limited stays in band
        rhs = np.sum(np.abs(u.values) ** 2) * 2 * np.pi / grid.n_fiber
        assert lhs == pytest.approx(rhs, rel=1e-10)

    def test_out_of_band(self, grid):
        u = random_band_limited(grid, seed=4, oscillatory=False)
        with pytest.raises(BandError):
            mode_extract(u, grid.n_fiber // 2)


class TestTwist:
    def test_algstar_phase(self):
        tw = TwistDescriptor(EndKind.ALGstar, k=2)
        s = np.array([0.0, 1.0, 2.5])
        assert np.allclose(tw.ang1_wrap_phase(3, s), np.exp(-1j * 3 * 2 * s))

    def test_alhstar_phase(self):
        tw = TwistDescriptor(EndKind.ALHstar, k=1)
        y = np.array([0.25])
        assert np.allclose(tw.ang1_wrap_phase(1, y),
                           np.exp(-2j * np.pi * 0.25))

    def test_cocycle_closes_for_integer_flux(self):
        assert TwistDescriptor(EndKind.ALGstar, 3).cocycle_defect(
            2, 2 * np.pi) < 1e-12
        assert TwistDescriptor(EndKind.ALHstar, 2).cocycle_defect(5, 1.0) < 1e-12

    def test_untwisted_kinds(self):
        for kind in (EndKind.ALF, EndKind.ALG, EndKind.ALH):
            tw = TwistDescriptor(kind, 7)
            assert np.all(tw.ang1_wrap_phase(3, np.linspace(0, 1, 5)) == 1.0)


class TestWeightedNorms:
    def test_weight_cancels(self, grid):
        vals = np.exp(0.7 * grid.rho)[:, None, None, None] * np.ones(grid.shape)
        assert weighted_norm(GridFunction(grid, vals), 0.7, "C0") == \
            pytest.approx(1.0, abs=1e-12)

    def test_alg_volume_norm(self):
        end = ModelEnd(EndKind.ALG, c=1.0, k=0, eps=0.5, rho_min=0.0,
                       rho_max=1.0)
        g = ChartGrid(end, 21, 8, 8, 8)
        one = GridFunction(g, np.ones(g.shape))
        assert weighted_norm(one, 0.0, "L2") == \
            pytest.approx((2 * np.pi) ** 1.5, rel=1e-12)

    def test_sobolev_hierarchy(self, grid):
        u = random_band_limited(grid, seed=5, oscillatory=False)
        l2 = weighted_norm(u, 0.3, "L2")
        w12 = weighted_norm(u, 0.3, "W12")
        w22 = weighted_norm(u, 0.3, "W22")
        assert l2 <= w12 <= w22

    def test_unknown_kind(self, grid):
        u = random_band_limited(grid, seed=6, oscillatory=False)
        with pytest.raises(ValueError):
            weighted_norm(u, 0.0, "H1")

    def test_mode_norm_matches_full(self, grid):
        # a single-mode function: mode norm carries the same L2 content
        vals = np.broadcast_to(np.cos(grid.rho)[:, None, None, None]
                               * np.exp(1j * grid.t)[None, None, None, :],
                               grid.shape)
        u = GridFunction(grid, vals)
        m = mode_extract(u, 1)
        assert weighted_norm(m, 0.2, "L2") == \
            pytest.approx(weighted_norm(u, 0.2, "L2"), rel=1e-12)


class TestSerialization:
    def test_npz_and_csv_dump(self, grid, tmp_path):
        u = random_band_limited(grid, seed=7, oscillatory=False)
        u.dump(tmp_path / "u.npz")
        data = np.load(tmp_path / "u.npz")
        assert np.allclose(data["values"], u.values)
        m = mode_extract(u, 1)
        m.dump(tmp_path / "m.csv", fmt="csv")
        lines = (tmp_path / "m.csv").read_text().splitlines()
        assert lines[0] == "i,j,l,re,im"
        i, j, l, re, im = lines[1].split(",")
        assert complex(float(re), float(im)) == pytest.approx(
            m.values[int(i), int(j), int(l)])


class TestPoincare:
    def test_single_mode_equality(self, grid):
        u = fiberize(grid, np.exp(1j * grid.t))
        assert poincare_check(u) == pytest.approx(1.0, abs=1e-6)

    def test_third_mode_ratio(self, grid):
        u = fiberize(grid, np.exp(3j * grid.t))
        assert poincare_check(u) == pytest.approx(1.0 / 3.0, abs=1e-9)

    def test_random_band_limited_below_bound(self, grid):
        mesh = grid.spacings[3]
        for seed in range(20):
            u = project_oscillatory(random_band_limited(grid, seed=seed))
            assert poincare_check(u) <= 1.0 + 10.0 * mesh ** 2

    def test_excess_approaches_one_from_below(self):
        end = ModelEnd(EndKind.ALH, c=1.0, k=0, eps=0.5, rho_min=1.0,
                       rho_max=3.0)
        worst = []
        for nf in (16, 32, 64):
            g = ChartGrid(end, 5, 4, 4, nf)
            w = max(poincare_check(project_oscillatory(
                random_band_limited(g, seed=s, band=5))) for s in range(30))
            worst.append(w)
        assert all(w <= 1.0 + 1e-9 for w in worst)

    def test_non_oscillatory_rejected(self, grid):
        u = fiberize(grid, 1.0 + np.cos(grid.t))
        with pytest.raises(ValueError):
            poincare_check(u)
