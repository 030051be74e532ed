import numpy as np
import pytest

from ghlab import (
    DomainError,
    EndKind,
    ModelEnd,
    default_delta_grid,
    run_adjoint_check,
    run_epsilon_uniformity,
    run_geometry_check,
    run_harmonic_convergence,
    run_indicial_scan,
    run_kernel_census,
    run_poincare_sweep,
    run_splitting_commutator,
)
from ghlab.experiments import PASS


def make(kind, **kw):
    defaults = dict(c=1.0, k=2 if kind is EndKind.ALF else 1, eps=0.5,
                    rho_min=1.0, rho_max=3.0)
    defaults.update(kw)
    return ModelEnd(kind, **defaults)


class TestGeometryCheck:
    def test_all_kinds_pass(self):
        recs = run_geometry_check([make(k) for k in EndKind])
        assert all(r.verdict == PASS for r in recs)
        names = {r.experiment for r in recs}
        assert names == {"bogomolny", "ellipticity", "mode0_reduction"}


class TestHarmonic:
    def test_alf_orders(self):
        recs = run_harmonic_convergence(make(EndKind.ALF))
        assert all(r.verdict == PASS for r in recs)
        fitted = {r.convergence_order for r in recs
                  if np.isfinite(r.convergence_order)}
        assert fitted and all(1.7 <= o <= 2.3 for o in fitted)

    def test_flat_kinds_exact(self):
        recs = run_harmonic_convergence(make(EndKind.ALHstar))
        assert all(r.verdict == PASS for r in recs)
        assert all(r.convergence_order == np.inf for r in recs)

    def test_needs_three_resolutions(self):
        with pytest.raises(DomainError):
            run_harmonic_convergence(make(EndKind.ALF), resolutions=(16, 32))


class TestPoincare:
    def test_sweep(self):
        end = make(EndKind.ALH, k=0)
        recs = run_poincare_sweep(end, [0.5, 2 ** -4], samples=15, n_fiber=32)
        assert all(r.verdict == PASS for r in recs)
        eq = [r for r in recs if r.note == "single-mode-equality"]
        assert len(eq) == 2
        assert all(abs(r.max_ratio_excess - 1.0) <= 1e-6 for r in eq)

    def test_bound_scales_with_eps(self):
        # halving eps halves the bound value itself; the normalized excess
        # stays comparable (checked through the record columns)
        end = make(EndKind.ALH, k=0)
        recs = run_poincare_sweep(end, [0.5, 0.25], samples=10, n_fiber=32)
        assert {r.eps for r in recs} == {0.5, 0.25}

    def test_sample_floor(self):
        with pytest.raises(DomainError):
            run_poincare_sweep(make(EndKind.ALH, k=0), [0.5], samples=3)

    def test_deterministic(self):
        end = make(EndKind.ALH, k=0)
        a = run_poincare_sweep(end, [0.5], samples=10, n_fiber=32, seed=7)
        b = run_poincare_sweep(end, [0.5], samples=10, n_fiber=32, seed=7)
        assert [r.max_ratio_excess for r in a] == [r.max_ratio_excess for r in b]


class TestIndicialScan:
    def test_grid_avoids_integers(self):
        grid = default_delta_grid()
        assert np.min(np.abs(grid - np.round(grid))) >= 1e-3
        with pytest.raises(DomainError):
            run_indicial_scan(make(EndKind.ALG),
                              delta_grid=np.array([-0.5, 0.0, 0.5]))

    def test_coarse_scan_alg(self):
        end = make(EndKind.ALG, rho_max=41.0)
        grid = default_delta_grid(-1.3, 1.3, 0.1)
        recs = run_indicial_scan(end, delta_grid=grid, n_list=(0, 1),
                                 points_per_unit=10.0)
        n0 = [r for r in recs if r.n == 0]
        assert n0[0].verdict == PASS
        assert "dips at" in n0[0].note
        n1 = [r for r in recs if r.n == 1]
        assert n1[0].verdict == PASS


class TestUniformity:
    def test_alf(self):
        end = make(EndKind.ALF, rho_max=21.0)
        recs = run_epsilon_uniformity(end, -0.5, [0.5, 0.25, 0.125],
                                      n_list=(0, 1), points_per_unit=16.0)
        assert all(r.verdict == PASS for r in recs)
        n0 = sorted(r.sigma_min for r in recs if r.n == 0)
        assert n0[-1] / n0[0] <= 3.0
        n1 = [r.sigma_min for r in sorted((r for r in recs if r.n == 1),
                                          key=lambda r: r.eps)]
        assert all(np.diff(n1) <= 1e-9)  # sigma grows as eps shrinks

    def test_delta_window_validated(self):
        with pytest.raises(DomainError):
            run_epsilon_uniformity(make(EndKind.ALF), 0.5, [0.5])


class TestKernelCensus:
    def test_alg_table(self):
        end = make(EndKind.ALG, rho_max=41.0)
        recs = run_kernel_census(end, [-0.5, 0.5], n_list=(0, 1),
                                 points_per_unit=20.0)
        table = {(r.delta, r.n): r for r in recs if "plain" in r.note}
        assert table[(-0.5, 0)].kernel_dim == 0
        assert table[(0.5, 0)].kernel_dim == 1
        assert table[(0.5, 1)].kernel_dim == 0
        assert all(r.verdict == PASS for r in recs)
        aug = [r for r in recs if "augmented" in r.note]
        assert len(aug) == 1 and aug[0].verdict == PASS
        assert "20/20" in aug[0].note

    def test_kernel_profile_matches_rho_branch(self):
        # the detected kernel of the invariant sector at delta = 1/2 follows
        # exp(-delta rho) (rho - rho_min)
        from ghlab.experiments import _rect_census
        from ghlab import separated_radial_block

        end = make(EndKind.ALG, rho_max=41.0)
        rho = np.linspace(1.0, 41.0, 1201)
        op = separated_radial_block(end, 0.5, 0, 0, 0, rho)
        sig, vecs, ref = _rect_census(op, k=2, want_vectors=True)
        assert sig[0] <= 1e-6 * ref < sig[1]
        prof = np.real(vecs[0])
        prof /= np.linalg.norm(prof)
        expect = (np.exp(-0.5 * rho) * (rho - 1.0))[1:len(prof) + 1]
        expect /= np.linalg.norm(expect)
        err = min(np.linalg.norm(prof - expect), np.linalg.norm(prof + expect))
        assert err < 1e-3

    def test_delta_margin_validated(self):
        with pytest.raises(DomainError):
            run_kernel_census(make(EndKind.ALG), [0.05])

    def test_deterministic(self):
        end = make(EndKind.ALHstar, rho_max=21.0)
        a = run_kernel_census(end, [0.25], n_list=(0,), points_per_unit=15.0)
        b = run_kernel_census(end, [0.25], n_list=(0,), points_per_unit=15.0)
        assert [(r.kernel_dim, r.sigma_min) for r in a] == \
            [(r.kernel_dim, r.sigma_min) for r in b]


class TestAdjointDriver:
    def test_alf_order_two(self):
        recs = run_adjoint_check(make(EndKind.ALF), [-0.3, 0.4])
        assert all(r.verdict == PASS for r in recs)
        assert all(1.7 <= r.convergence_order <= 2.3 for r in recs)

    def test_torus_exact(self):
        recs = run_adjoint_check(make(EndKind.ALGstar), [-0.3])
        assert all(r.verdict == PASS for r in recs)
        assert all(r.convergence_order == np.inf for r in recs)
        assert "delta*" in recs[0].note


class TestCommutator:
    def test_alh(self):
        recs = run_splitting_commutator(make(EndKind.ALH, k=0),
                                        grid_sizes=(7, 4, 4, 8))
        assert recs[0].verdict == PASS
        assert recs[0].residual <= 1e-10

    def test_alf_rejected(self):
        with pytest.raises(DomainError):
            run_splitting_commutator(make(EndKind.ALF))


class TestRecordHygiene:
    def test_inputs_echoed(self):
        end = make(EndKind.ALG, rho_max=21.0)
        recs = run_kernel_census(end, [0.25], n_list=(0,),
                                 points_per_unit=15.0)
        for r in recs:
            assert r.kind == "ALG" and r.c == 1.0 and r.k == 1
            assert r.eps == 0.5 and r.rho_min == 1.0 and r.rho_max == 21.0
