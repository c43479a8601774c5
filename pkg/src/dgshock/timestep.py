"""SSP-RK2 stepping and the classical method-of-lines DG solver.

The classical solver inverts the element mass matrix to turn the weak form
into ``u_t = L(u, t)`` and marches it with the same two-stage scheme the
network solver uses. It serves as the reference the trained network is
checked against.
"""

from __future__ import annotations

import logging
import warnings
from typing import Callable, Iterator, Sequence

import numpy as np

from dgshock.weakform import Discretization, ProblemSpec, apply_dirichlet, project, spatial_terms

log = logging.getLogger(__name__)

BLOWUP_LIMIT = 1e6
DEFAULT_CFL = 0.3


class SolverAbort(RuntimeError):
    """Raised when a time march produces non-finite or exploding values."""


def ssprk2_step(rhs: Callable, u: np.ndarray, t: float, dt: float,
                post: Callable | None = None) -> np.ndarray:
    """One step of the two-stage, second-order SSP Runge-Kutta scheme.

    ``post(state, t)`` is applied to the intermediate and final states (used
    for Dirichlet post-processing).
    """
    if not dt > 0:
        raise ValueError(f"time step must be positive, got {dt}")
    k0 = np.asarray(rhs(u, t), dtype=float)
    if not np.all(np.isfinite(k0)):
        raise SolverAbort(f"non-finite right-hand side at t={t}")
    v1 = u + dt * k0
    if post is not None:
        v1 = post(v1, t + dt)
    k1 = np.asarray(rhs(v1, t + dt), dtype=float)
    if not np.all(np.isfinite(k1)):
        raise SolverAbort(f"non-finite right-hand side at t={t + dt}")
    out = u + 0.5 * dt * (k0 + k1)
    if post is not None:
        out = post(out, t + dt)
    return out


def oracle_rhs(u: np.ndarray, prob: ProblemSpec, t: float, disc: Discretization) -> np.ndarray:
    """Time derivative solving the weak form exactly: ``M udot = -(spatial terms)``."""
    b = -np.asarray(spatial_terms(np.asarray(u, dtype=float), prob, t, disc))
    # block-diagonal solve; the uniform mesh shares one (symmetric) element mass matrix
    return b @ disc.mass_inv.T


def step_sizes(t0: float, t1: float, dt: float) -> Iterator[float]:
    """Steps of size ``dt`` from ``t0`` to ``t1``, shortening only the last one."""
    t = t0
    while t1 - t > 1e-12 * max(1.0, abs(t1)):
        remaining = t1 - t
        step = remaining if remaining - dt < 1e-9 * dt else dt
        yield step
        t = t1 if step == remaining else t + step


def cfl_limit(prob: ProblemSpec, u: np.ndarray, disc: Discretization, cfl: float = DEFAULT_CFL) -> float:
    speed = float(np.max(np.abs(prob.flux.dFdu(np.asarray(u)))))
    return np.inf if speed == 0 else cfl * disc.mesh.h / speed


def oracle_solve(prob: ProblemSpec, disc: Discretization, dt: float, T: float,
                 snapshot_times: Sequence[float] = (), cfl: float = DEFAULT_CFL,
                 on_step: Callable | None = None) -> list[np.ndarray]:
    """March the classical DG scheme to ``T``; returns one field per snapshot time.

    ``on_step(u, t)`` is called after every completed step.
    """
    times = sorted(set(float(s) for s in snapshot_times))
    if any(s < 0 or s > T + 1e-12 for s in times):
        raise ValueError(f"snapshot times {times} must lie in [0, {T}]")
    u = project(prob, disc)
    limit = cfl_limit(prob, u, disc, cfl)
    if dt > limit:
        warnings.warn(f"dt={dt} exceeds the CFL estimate {limit:.3g} (cfl={cfl})", stacklevel=2)

    def post(state, t):
        return apply_dirichlet(state, prob.bc, t)

    def rhs(state, t):
        return oracle_rhs(state, prob, t, disc)

    snapshots = {}
    t = 0.0
    for target in times + ([T] if not times or times[-1] < T else []):
        for step in step_sizes(t, target, dt):
            u = ssprk2_step(rhs, u, t, step, post)
            t = t + step
            if not np.all(np.isfinite(u)) or np.max(np.abs(u)) > BLOWUP_LIMIT:
                raise SolverAbort(f"solution blew up at t={t:.6g} (max |u| > {BLOWUP_LIMIT:g})")
            if on_step is not None:
                on_step(u, t)
        t = target
        snapshots[target] = u.copy()
    return [snapshots[s] for s in times] if times else [u]
