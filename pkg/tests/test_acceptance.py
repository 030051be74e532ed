"""Acceptance suite: one test per primary criterion, each printing a
pass/fail line with its runtime.  Tolerances are pinned here, not computed.

Run with  pytest tests/test_acceptance.py -v -s
"""

import time

import numpy as np
import pytest

from ghlab import (
    ChartGrid,
    EndKind,
    ModelEnd,
    assemble_base_reduction,
    assemble_mode_operator,
    bogomolny_residual,
)
from ghlab.config import Config
from ghlab.experiments import FAIL, INDET, PASS
from ghlab.profiles import (
    adjoint_profile,
    commutator_profile,
    five_ends,
    harmonic_profile,
    indicial_profile,
    kernel_profile,
    poincare_profile,
    uniformity_profile,
)

CFG = Config()


def report(name, ok, t0, detail=""):
    status = "PASS" if ok else "FAIL"
    print(f"[{status}] {name} ({time.time() - t0:.1f}s) {detail}")
    assert ok, f"{name}: {detail}"


class TestAcceptance:
    def test_bogomolny_identity(self):
        # exact for the analytic-constant gauges; ALF converges at order 2
        # with mesh-halving ratio in [3.5, 4.5]; runtime < 10 s
        t0 = time.time()
        ok = True
        detail = []
        for end in five_ends():
            if end.kind is EndKind.ALF:
                r1 = bogomolny_residual(end, ChartGrid(end, 33, 26, 8, 8))
                r2 = bogomolny_residual(end, ChartGrid(end, 65, 52, 8, 8))
                ratio = r1 / r2
                ok &= 3.5 <= ratio <= 4.5
                detail.append(f"ALF ratio {ratio:.3f}")
            else:
                res = bogomolny_residual(end, ChartGrid(end, 33, 16, 16, 8))
                ok &= res <= 1e-12
                detail.append(f"{end.kind.value} {res:.1e}")
        elapsed = time.time() - t0
        ok &= elapsed < 10.0
        report("bogomolny identity", ok, t0, "; ".join(detail))

    def test_mode0_reduction(self):
        # entrywise agreement to 1e-12 on all kinds, eps in {1/2, 1/8},
        # delta in {-1/2, 1/2}; runtime < 30 s
        t0 = time.time()
        worst = 0.0
        for end0 in five_ends():
            for eps in (0.5, 0.125):
                for delta in (-0.5, 0.5):
                    end = ModelEnd(end0.kind, c=end0.c, k=end0.k, eps=eps,
                                   rho_min=end0.rho_min, rho_max=end0.rho_max)
                    grid = ChartGrid(end, 11, 8, 8, 8)
                    a = assemble_mode_operator(end, grid, delta, 0)
                    b = assemble_base_reduction(end, grid, delta)
                    scale = abs(b.matrix).max()
                    worst = max(worst, abs(a.matrix - b.matrix).max() / scale)
        ok = worst <= 1e-12 and time.time() - t0 < 30.0
        report("mode-0 reduction", ok, t0, f"worst entrywise {worst:.2e}")

    def test_harmonic_convergence(self):
        # fitted order in [1.7, 2.3] for every fit-eligible analytic harmonic
        # of every kind (exact discrete annihilation passes outright),
        # 3 resolutions up to 128 radial points; runtime < 2 min
        t0 = time.time()
        records = harmonic_profile(CFG)
        ok = all(r.verdict == PASS for r in records)
        fitted = sorted({round(r.convergence_order, 3) for r in records
                         if np.isfinite(r.convergence_order)})
        ok &= all(1.7 <= o <= 2.3 for o in fitted)
        ok &= time.time() - t0 < 120.0
        report("harmonic convergence", ok, t0, f"fitted orders {fitted}")

    def test_poincare(self):
        # worst excess <= 1 + 10*mesh^2 for eps in {2^-1, 2^-4, 2^-8},
        # 100 samples each; single-mode equality within 1e-6; < 1 min
        t0 = time.time()
        records = poincare_profile(CFG)
        samples = [r for r in records if r.note.startswith("sample")]
        eq = [r for r in records if r.note == "single-mode-equality"]
        assert {r.eps for r in samples} == {0.5, 2.0 ** -4, 2.0 ** -8}
        assert sum(1 for r in samples if r.eps == 0.5) == 100
        worst = max(r.max_ratio_excess for r in samples)
        tol = samples[0].tolerance
        ok = all(r.verdict == PASS for r in records)
        ok &= all(abs(r.max_ratio_excess - 1.0) <= 1e-6 for r in eq)
        ok &= time.time() - t0 < 60.0
        report("poincare", ok, t0, f"worst excess {worst:.6f} (tol {tol:.4f})")

    def test_indicial_roots(self):
        # ALF and ALG, n = 0: every local sigma_min minimum within 0.05 of an
        # integer on [-2.5, 1.5]; n = +-1: no minimum on (-1, 1) below
        # 0.5 x window median; runtime < 10 min
        t0 = time.time()
        records = indicial_profile(CFG)
        ok = True
        detail = []
        for kind in ("ALF", "ALG"):
            for n in (0, 1, -1):
                rs = [r for r in records if r.kind == kind and r.n == n]
                ok &= all(r.verdict == PASS for r in rs)
                if n == 0:
                    detail.append(f"{kind}: {rs[0].note}")
        ok &= time.time() - t0 < 600.0
        report("indicial roots", ok, t0, "; ".join(detail))

    def test_kernel_census(self):
        # delta=-1/2 plain n=0 -> 0; delta=+1/2 n=0 -> 1; delta=+-1/4
        # n=+-1 -> 0; augmented at delta=-1/4 solvable 20/20; spectral gap
        # certificates >= 1e3; runtime < 10 min
        t0 = time.time()
        records = kernel_profile(CFG)
        plain = {(r.kind, r.delta, r.n): r for r in records
                 if "plain" in r.note}
        ok = True
        for kind in ("ALF", "ALG", "ALHstar"):
            ok &= plain[(kind, -0.5, 0)].kernel_dim == 0
            ok &= plain[(kind, 0.5, 0)].kernel_dim == 1
            for n in (1, -1):
                ok &= plain[(kind, 0.25, n)].kernel_dim == 0
                ok &= plain[(kind, -0.25, n)].kernel_dim == 0
        ok &= all(r.verdict == PASS for r in records)
        ok &= not any(r.verdict == INDET for r in records)
        aug = [r for r in records if "augmented" in r.note]
        ok &= len(aug) == 2 and all("20/20" in r.note for r in aug)
        ok &= time.time() - t0 < 600.0
        report("kernel census", ok, t0,
               f"{len(plain)} plain cases + {len(aug)} augmented")

    def test_adjoint_duality(self):
        # defect order in [1.7, 2.3] for ALF (delta* = -(delta+1)); the flat
        # torus charts are exactly dual (defect at rounding, passing
        # outright) with delta* = -delta; runtime < 2 min
        t0 = time.time()
        records = adjoint_profile(CFG)
        ok = all(r.verdict == PASS for r in records)
        alf_orders = [r.convergence_order for r in records if r.kind == "ALF"]
        ok &= all(1.7 <= o <= 2.3 for o in alf_orders)
        torus = [r for r in records if r.kind != "ALF"]
        ok &= all(r.convergence_order == np.inf for r in torus)
        ok &= all("delta*" in r.note for r in records)
        ok &= time.time() - t0 < 120.0
        report("adjoint duality", ok, t0,
               f"ALF orders {[round(o, 2) for o in alf_orders]}; "
               f"{len(torus)} exact torus cases")

    def test_epsilon_uniformity(self):
        # ALF, delta = -1/2, eps in {2^-1..2^-8}: n=0 max/min ratio <= 3,
        # n=+-1,+-2 nondecreasing as eps shrinks, truncation drift <= 10%;
        # runtime < 15 min
        t0 = time.time()
        records = uniformity_profile(CFG)
        ok = all(r.verdict == PASS for r in records)
        n0 = [r.sigma_min for r in records if r.n == 0]
        ratio = max(n0) / min(n0)
        ok &= ratio <= 3.0
        for n in (1, -1, 2, -2):
            rs = sorted((r for r in records if r.n == n), key=lambda r: r.eps)
            vals = [r.sigma_min for r in rs]  # ascending eps
            ok &= all(np.diff(vals) <= 1e-6 * np.abs(vals[:-1]))
        drift = max(r.drift for r in records)
        ok &= drift <= 0.10
        ok &= time.time() - t0 < 900.0
        report("epsilon uniformity", ok, t0,
               f"n=0 ratio {ratio:.4f}, max drift {drift:.3f}")

    def test_splitting_commutator(self):
        # <= 1e-10 relative on a coarse 4D ALH grid; runtime < 1 min
        t0 = time.time()
        records = commutator_profile(CFG)
        ok = all(r.verdict == PASS for r in records)
        ok &= all(r.residual <= 1e-10 for r in records)
        ok &= time.time() - t0 < 60.0
        report("splitting commutator", ok, t0,
               f"residual {records[0].residual:.2e}")
