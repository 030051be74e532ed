"""Canonical parameter profiles shared by the CLI and the acceptance suite.

Each profile function maps a configuration (plus the ``quick`` flag) to the
records of one experiment.  The full profiles are the ones the acceptance
criteria are pinned to; ``quick`` halves grids for smoke runs.
"""

from __future__ import annotations

from .experiments import (
    run_adjoint_check,
    run_geometry_check,
    run_harmonic_convergence,
    run_indicial_scan,
    run_kernel_census,
    run_poincare_sweep,
    run_splitting_commutator,
)
from .geometry import EndKind, ModelEnd


def five_ends(c=1.0, eps=0.5, rho_min=1.0, rho_max=5.0):
    return [
        ModelEnd(EndKind.ALF, c=c, k=2, eps=eps, rho_min=rho_min, rho_max=rho_max),
        ModelEnd(EndKind.ALG, c=c, k=1, eps=eps, rho_min=rho_min, rho_max=rho_max),
        ModelEnd(EndKind.ALGstar, c=c, k=1, eps=eps, rho_min=rho_min,
                 rho_max=rho_max),
        ModelEnd(EndKind.ALH, c=c, k=1, eps=eps, rho_min=rho_min, rho_max=rho_max),
        ModelEnd(EndKind.ALHstar, c=c, k=1, eps=eps, rho_min=rho_min,
                 rho_max=rho_max),
    ]


def geometry_profile(cfg, quick=False):
    ends = five_ends(c=cfg.c, eps=cfg.eps)
    return run_geometry_check(ends, points_per_unit=4.0 if quick else 8.0)


def harmonic_profile(cfg, quick=False):
    res = (16, 32, 64) if quick else (32, 64, 128)
    records = []
    for end in five_ends(c=cfg.c, eps=cfg.eps, rho_min=1.0, rho_max=3.0):
        records += run_harmonic_convergence(end, resolutions=res)
    return records


def poincare_profile(cfg, quick=False):
    end = ModelEnd(EndKind.ALH, c=cfg.c, k=0, eps=min(cfg.eps, cfg.eps_max),
                   rho_min=1.0, rho_max=3.0)
    eps_list = cfg.eps_list or (2.0 ** -1, 2.0 ** -4, 2.0 ** -8)
    eps_list = tuple(min(e, cfg.eps_max) for e in eps_list)
    return run_poincare_sweep(end, eps_list,
                              samples=10 if quick else cfg.samples,
                              n_fiber=32 if quick else 64, seed=cfg.seed)


def _scan_ends(cfg, quick):
    hi = 41.0 if quick else 101.0
    return [
        ModelEnd(EndKind.ALF, c=cfg.c, k=2, eps=cfg.eps, rho_min=1.0, rho_max=hi),
        ModelEnd(EndKind.ALG, c=cfg.c, k=1, eps=cfg.eps, rho_min=1.0, rho_max=hi),
    ]


def indicial_profile(cfg, quick=False):
    from .experiments import default_delta_grid

    grid = default_delta_grid(cfg.delta_lo, cfg.delta_hi,
                              0.1 if quick else cfg.delta_step)
    records = []
    for end in _scan_ends(cfg, quick):
        records += run_indicial_scan(end, delta_grid=grid, n_list=cfg.n_list,
                                     points_per_unit=8.0 if quick else 16.0,
                                     threads=cfg.threads)
    return records


def uniformity_profile(cfg, quick=False):
    from .experiments import run_epsilon_uniformity

    end = ModelEnd(EndKind.ALF, c=cfg.c, k=2, eps=0.5, rho_min=1.0,
                   rho_max=21.0)
    eps_list = cfg.eps_list or tuple(2.0 ** -j for j in range(1, 9))
    n_list = (0, 1, -1) if quick else (0, 1, -1, 2, -2)
    return run_epsilon_uniformity(end, cfg.delta, eps_list, n_list=n_list,
                                  points_per_unit=12.0 if quick else 24.0)


def kernel_profile(cfg, quick=False):
    kinds = [(EndKind.ALF, 2), (EndKind.ALG, 1), (EndKind.ALHstar, 1)]
    deltas = [-0.5, 0.5, 0.25, -0.25]
    records = []
    for kind, k in kinds:
        end = ModelEnd(kind, c=cfg.c, k=k, eps=cfg.eps, rho_min=1.0,
                       rho_max=21.0 if quick else 41.0)
        records += run_kernel_census(
            end, deltas, n_list=(0, 1, -1), rhs_samples=20,
            points_per_unit=15.0 if quick else 30.0, seed=cfg.seed)
    return records


def adjoint_profile(cfg, quick=False):
    deltas = [-0.7, -0.3, 0.0, 0.4]
    sizes = (13, 8, 8, 8) if quick else (21, 12, 8, 8)
    records = []
    for end in five_ends(c=cfg.c, eps=cfg.eps, rho_min=1.0, rho_max=3.0):
        records += run_adjoint_check(end, deltas, samples=cfg.samples
                                     if cfg.samples <= 20 else 10,
                                     grid_sizes=sizes, seed=cfg.seed)
    return records


def commutator_profile(cfg, quick=False):
    end = ModelEnd(EndKind.ALH, c=cfg.c, k=0, eps=cfg.eps, rho_min=1.0,
                   rho_max=3.0)
    sizes = (7, 4, 4, 8) if quick else (9, 6, 6, 16)
    return run_splitting_commutator(end, grid_sizes=sizes, seed=cfg.seed)


PROFILES = {
    "geometry-check": geometry_profile,
    "harmonic": harmonic_profile,
    "poincare": poincare_profile,
    "indicial": indicial_profile,
    "uniformity": uniformity_profile,
    "kernel": kernel_profile,
    "adjoint": adjoint_profile,
    "commutator": commutator_profile,
}
