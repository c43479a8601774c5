"""Benchmark problems, exact references and error metrics."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from dgshock.basis import node_sides
from dgshock.flux import advection_flux, burgers_flux, zero_flux
from dgshock.weakform import (BCSpec, Discretization, ProblemSpec, dirichlet, outflow,
                              periodic)

DEFAULT_K = 128
DEFAULT_DT = 0.004


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    problem: ProblemSpec
    K: int = DEFAULT_K
    N_p: int = 2
    n_gauss: int = 2
    dt: float = DEFAULT_DT
    T: float = 1.0
    snapshot_times: tuple = ()
    smooth: bool = False
    compare_oracle: bool = True
    trainer: dict = field(default_factory=dict)

    def __post_init__(self):
        if any(s < 0 or s > self.T + 1e-12 for s in self.snapshot_times):
            raise ValueError(f"snapshot times {self.snapshot_times} outside [0, {self.T}]")


def _piecewise(x, side, breaks, branches):
    """Evaluate ``branches[i](x)`` on the i-th interval cut by ``breaks``.

    At a breakpoint, ``side > 0`` selects the right interval and ``side <= 0``
    the left one.
    """
    x = np.asarray(x, dtype=float)
    side = np.broadcast_to(np.asarray(side), x.shape)
    idx = np.where(side > 0,
                   np.searchsorted(breaks, x, side="right"),
                   np.searchsorted(breaks, x, side="left"))
    out = np.zeros_like(x)
    for i, fn in enumerate(branches):
        sel = idx == i
        if np.any(sel):
            out[sel] = fn(x[sel])
    return out


# -- static discontinuity --------------------------------------------------

def _static_rate(x, side=1):
    return _piecewise(x, side, [0.0], [lambda s: np.sin(6 * s), lambda s: np.cos(12 * s)])


def _static_exact(x, t, side=1):
    return _piecewise(x, side, [0.0], [lambda s: (0.2 + t) * np.sin(6 * s),
                                        lambda s: (0.5 + t) * np.cos(12 * s)])


def static_discontinuity_problem(**overrides) -> ExperimentSpec:
    prob = ProblemSpec(
        name="static-discontinuity",
        x_min=-2.0, x_max=2.0,
        flux=zero_flux(),
        u0=lambda x, side=1: _static_exact(x, 0.0, side),
        bc=BCSpec(outflow(), outflow()),
        # quadrature points never sit on x = 0, so the side is irrelevant there
        source=lambda u, x, t: _static_rate(x),
        analytic=_static_exact,
    )
    spec = ExperimentSpec("static-discontinuity", prob, T=1.0, snapshot_times=(0.1, 0.5, 1.0))
    return replace(spec, **overrides)


# -- advection -------------------------------------------------------------

def _gaussian_pulse(x, t, side=0):
    return np.exp(-5.0 * (np.asarray(x, dtype=float) - t) ** 2)


def advection_smooth_problem(**overrides) -> ExperimentSpec:
    prob = ProblemSpec(
        name="advection-smooth",
        x_min=-2.0, x_max=2.0,
        flux=advection_flux(1.0),
        u0=lambda x, side=0: _gaussian_pulse(x, 0.0),
        bc=BCSpec(dirichlet(0.0), outflow()),
        analytic=_gaussian_pulse,
    )
    spec = ExperimentSpec("advection-smooth", prob, T=1.25, snapshot_times=(0.25, 0.75, 1.25), smooth=True)
    return replace(spec, **overrides)


STAIRCASE_BREAKS = (-1.5, -0.5, 0.5)
STAIRCASE_LEVELS = (0.25, 0.0, -0.25, -0.5)


def _staircase(x, t, side=1):
    x = np.asarray(x, dtype=float)
    branches = [lambda s, v=v: np.full_like(s, v) for v in STAIRCASE_LEVELS]
    return _piecewise(x - t, side, list(STAIRCASE_BREAKS), branches)


def advection_jump_problem(**overrides) -> ExperimentSpec:
    prob = ProblemSpec(
        name="advection-jump",
        x_min=-2.0, x_max=2.0,
        flux=advection_flux(1.0),
        u0=lambda x, side=1: _staircase(x, 0.0, side),
        bc=BCSpec(dirichlet(0.25), outflow()),
        analytic=_staircase,
    )
    spec = ExperimentSpec("advection-jump", prob, T=1.25, snapshot_times=(0.25, 0.75, 1.25))
    return replace(spec, **overrides)


# -- Burgers ---------------------------------------------------------------

SHOCK_TIME = 1.0 / np.pi


def burgers_characteristics(x, t, tol: float = 1e-12, max_iter: int = 100) -> np.ndarray:
    """Entropy solution of u_t + (u^2/2)_x = 0, u(x, 0) = -sin(pi x) on [-1, 1].

    For x > 0 the foot ``s`` of the characteristic through (x, t) solves
    ``g(s) = s - t sin(pi s) - x = 0`` on the branch where ``g`` increases;
    after the shock forms at t = 1/pi this discards the characteristics that
    have already entered the stationary shock at x = 0. Values for x < 0 follow
    from oddness. Safeguarded Newton: a step leaving the bracket is replaced by
    bisection.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.zeros_like(x)
    pos = np.abs(x) > 0
    xa = np.abs(x[pos])
    if t * np.pi > 1.0:
        lo_start = np.arccos(1.0 / (np.pi * t)) / np.pi  # minimum of g
    else:
        lo_start = 0.0
    lo = np.full_like(xa, lo_start)
    hi = np.ones_like(xa)
    s = np.clip(xa, lo, hi)

    def g(s):
        return s - t * np.sin(np.pi * s) - xa

    for _ in range(max_iter):
        gs = g(s)
        # g is increasing on [lo, hi]
        below = gs < 0
        lo = np.where(below, s, lo)
        hi = np.where(below, hi, s)
        dg = 1.0 - np.pi * t * np.cos(np.pi * s)
        with np.errstate(divide="ignore", invalid="ignore"):
            s_new = s - gs / dg
        bad = ~np.isfinite(s_new) | (s_new < lo) | (s_new > hi)
        s_new = np.where(bad, 0.5 * (lo + hi), s_new)
        done = np.abs(s_new - s) < tol
        s = s_new
        if np.all(done):
            break
    out[pos] = -np.sign(x[pos]) * np.sin(np.pi * s)
    return out


def _burgers_exact(x, t, side=0):
    return burgers_characteristics(x, t)


def burgers_problem(**overrides) -> ExperimentSpec:
    prob = ProblemSpec(
        name="burgers",
        x_min=-1.0, x_max=1.0,
        flux=burgers_flux(),
        u0=lambda x, side=0: -np.sin(np.pi * np.asarray(x, dtype=float)),
        bc=BCSpec(dirichlet(0.0), dirichlet(0.0)),
        analytic=_burgers_exact,
    )
    spec = ExperimentSpec("burgers", prob, T=0.8, snapshot_times=(0.2, 0.5, 0.8))
    return replace(spec, **overrides)


def with_periodic(prob: ProblemSpec) -> ProblemSpec:
    return replace(prob, bc=BCSpec(periodic(), periodic()))


EXPERIMENTS: dict[str, Callable[..., ExperimentSpec]] = {
    "static-discontinuity": static_discontinuity_problem,
    "advection-smooth": advection_smooth_problem,
    "advection-jump": advection_jump_problem,
    "burgers": burgers_problem,
}


def get_experiment(name: str, **overrides) -> ExperimentSpec:
    try:
        factory = EXPERIMENTS[name]
    except KeyError:
        raise ValueError(f"unknown experiment {name!r}; choose from {sorted(EXPERIMENTS)}") from None
    return factory(**overrides)


# -- metrics ---------------------------------------------------------------

def exact_nodal(analytic: Callable, disc: Discretization, t: float) -> np.ndarray:
    """Exact solution at every DOF, one-sided at duplicated interface nodes."""
    return np.asarray(analytic(disc.nodes, t, node_sides(disc.mesh)), dtype=float)


def error_metrics(numeric, analytic: Callable, disc: Discretization, t: float) -> dict:
    """Node-wise errors. ``L2`` weights each node by h / N_p so it approximates
    the continuous L2 norm (the trapezoidal rule for linear elements)."""
    err = np.asarray(numeric, dtype=float) - exact_nodal(analytic, disc, t)
    weight = disc.mesh.h / disc.mesh.N_p
    return {
        "MSE": float(np.mean(err ** 2)),
        "L1": float(np.mean(np.abs(err))),
        "L2": float(np.sqrt(weight * np.sum(err ** 2))),
        "Linf": float(np.max(np.abs(err))),
    }
