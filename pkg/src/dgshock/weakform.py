"""DG weak-form residual for scalar 1-D conservation laws.

For element ``k`` and test function ``Phi_n`` the residual is::

    R[k, n] =  int u_t Phi_n dx - int F(u) dPhi_n/dx dx
             + [Fhat n Phi_n] on both element ends - int G(u, x, t) Phi_n dx

Volume integrals use the configured Gauss rule through the basis kernels.
All routines accept either numpy arrays or autodiff tensors for the state, so
the same code serves the classical solver and the training loss.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from dgshock import autodiff as ad
from dgshock.basis import (BasisTable, apply_kernel, gauss_rule, lagrange_basis, make_kernels,
                           project_initial_condition)
from dgshock.flux import FluxModel, InterfaceState, global_wave_speed, lax_friedrichs
from dgshock.mesh import DofLayout, Mesh1D, build_mesh

BOUNDARY_KINDS = ("dirichlet", "neumann", "periodic", "outflow")


@dataclass(frozen=True)
class Boundary:
    kind: str
    value: Optional[Callable[[float], float]] = None

    def __post_init__(self):
        if self.kind not in BOUNDARY_KINDS:
            raise ValueError(f"unknown boundary kind {self.kind!r}")
        if self.kind in ("dirichlet", "neumann") and self.value is None:
            raise ValueError(f"{self.kind} boundary needs a value function")

    def at(self, t: float) -> float:
        return float(self.value(t))


def dirichlet(value) -> Boundary:
    fn = value if callable(value) else (lambda t, v=float(value): v)
    return Boundary("dirichlet", fn)


def neumann(flux) -> Boundary:
    """Prescribed outward normal flux ``Fhat . n`` on the boundary."""
    fn = flux if callable(flux) else (lambda t, q=float(flux): q)
    return Boundary("neumann", fn)


def outflow() -> Boundary:
    return Boundary("outflow")


def periodic() -> Boundary:
    return Boundary("periodic")


@dataclass(frozen=True)
class BCSpec:
    left: Boundary
    right: Boundary

    def __post_init__(self):
        if (self.left.kind == "periodic") != (self.right.kind == "periodic"):
            raise ValueError("periodic boundaries must be set at both ends or neither")

    @property
    def periodic(self) -> bool:
        return self.left.kind == "periodic"


@dataclass(frozen=True)
class ProblemSpec:
    """A scalar conservation law ``u_t + F(u)_x = G(u, x, t)`` on an interval.

    ``u0(x, side)`` and ``analytic(x, t, side)`` take a ``side`` array (+1/-1/0)
    selecting one-sided limits at breakpoints of piecewise data.
    """

    name: str
    x_min: float
    x_max: float
    flux: FluxModel
    u0: Callable
    bc: BCSpec
    source: Optional[Callable] = None
    analytic: Optional[Callable] = None
    global_lf: bool = False


@dataclass(frozen=True)
class Discretization:
    mesh: Mesh1D
    layout: DofLayout
    basis: BasisTable
    mass: np.ndarray = field(init=False, repr=False)
    mass_inv: np.ndarray = field(init=False, repr=False)
    quad_x: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        M = element_mass_matrix(self.mesh.h, self.basis)
        object.__setattr__(self, "mass", M)
        object.__setattr__(self, "mass_inv", np.linalg.inv(M))
        object.__setattr__(self, "quad_x", self.mesh.to_physical(self.basis.rule.points))

    @property
    def kernels(self):
        return make_kernels(self.basis)

    @property
    def nodes(self) -> np.ndarray:
        return self.layout.nodes


def discretize(x_min: float, x_max: float, K: int, N_p: int = 2, n_gauss: int = 2) -> Discretization:
    mesh, layout = build_mesh(x_min, x_max, K, N_p)
    return Discretization(mesh, layout, lagrange_basis(N_p, gauss_rule(n_gauss)))


def project(prob: ProblemSpec, disc: Discretization) -> np.ndarray:
    """Initial nodal field of ``prob`` on ``disc``."""
    return project_initial_condition(prob.u0, disc.mesh, disc.basis)


def element_mass_matrix(h: float, basis: BasisTable) -> np.ndarray:
    if h <= 0:
        raise ValueError("element width must be positive")
    B, w = basis.values, basis.rule.weights
    return 0.5 * h * (B.T * w) @ B


def _check_field(u, disc: Discretization, label: str):
    shape = ad.value(u).shape
    if shape != disc.mesh.shape:
        raise ValueError(f"{label} has shape {shape}, mesh expects {disc.mesh.shape}")
    if not np.all(np.isfinite(ad.value(u))):
        raise ValueError(f"{label} contains non-finite values")


def _boundary_flux(b: Boundary, model: FluxModel, interior, n: float, t: float, C=None):
    if b.kind == "neumann":
        return b.at(t) + 0.0 * interior
    exterior = b.at(t) if b.kind == "dirichlet" else interior
    return lax_friedrichs(model, InterfaceState(interior, exterior + 0.0 * interior, n), C)


def face_fluxes(u, prob: ProblemSpec, t: float):
    """Normal fluxes on the right (n=+1) and left (n=-1) end of every element.

    Each interior face is evaluated once, so the two neighbours see exactly
    opposite values.
    """
    model = prob.flux
    C = global_wave_speed(model, u) if prob.global_lf else None
    left_traces, right_traces = u[:, 0], u[:, -1]
    if prob.bc.periodic:
        nxt = ad.concat([left_traces[1:], left_traces[:1]])
        fhat = lax_friedrichs(model, InterfaceState(right_traces, nxt, 1.0), C)
        right = fhat
        left = -ad.concat([fhat[-1:], fhat[:-1]])
        return right, left
    fhat = lax_friedrichs(model, InterfaceState(right_traces[:-1], left_traces[1:], 1.0), C)
    f_lo = _boundary_flux(prob.bc.left, model, left_traces[:1], -1.0, t, C)
    f_hi = _boundary_flux(prob.bc.right, model, right_traces[-1:], 1.0, t, C)
    right = ad.concat([fhat, f_hi])
    left = ad.concat([f_lo, -fhat])
    return right, left


def spatial_terms(u, prob: ProblemSpec, t: float, disc: Discretization):
    """All residual terms that do not involve the time derivative."""
    basis = disc.basis
    w = basis.rule.weights
    vals, ders = disc.kernels
    uq = apply_kernel(vals, u)
    # int F dPhi/dx dx: the 2/h of the derivative cancels the h/2 Jacobian
    volume = (prob.flux.F(uq) * w) @ basis.derivs
    right, left = face_fluxes(u, prob, t)
    K = disc.mesh.K
    surface = right.reshape(K, 1) * basis.endpoint_values[1:2] + left.reshape(K, 1) * basis.endpoint_values[0:1]
    terms = surface - volume
    if prob.source is not None:
        g = prob.source(uq, disc.quad_x, t)
        terms = terms - (0.5 * disc.mesh.h) * ((g * w) @ basis.values)
    return terms


def mass_term(udot, disc: Discretization):
    basis = disc.basis
    udq = apply_kernel(disc.kernels[0], udot)
    return (0.5 * disc.mesh.h) * ((udq * basis.rule.weights) @ basis.values)


def assemble_residual(u, udot, prob: ProblemSpec, t: float, disc: Discretization):
    """Weak-form residual, shape (K, N_p). Returns a tensor if either input is one."""
    _check_field(u, disc, "state")
    _check_field(udot, disc, "time derivative")
    return mass_term(udot, disc) + spatial_terms(u, prob, t, disc)


def dirichlet_mask(prob: ProblemSpec, mesh: Mesh1D) -> np.ndarray:
    """True for DOFs whose value is imposed by a Dirichlet condition."""
    mask = np.zeros(mesh.shape, dtype=bool)
    if prob.bc.left.kind == "dirichlet":
        mask[0, 0] = True
    if prob.bc.right.kind == "dirichlet":
        mask[-1, -1] = True
    return mask


def apply_dirichlet(u, bc: BCSpec, t: float):
    """Overwrite the boundary node of each Dirichlet end with the prescribed value."""
    shape = ad.value(u).shape
    mask = np.zeros(shape, dtype=bool)
    imposed = np.zeros(shape)
    if bc.left.kind == "dirichlet":
        mask[0, 0] = True
        imposed[0, 0] = bc.left.at(t)
    if bc.right.kind == "dirichlet":
        mask[-1, -1] = True
        imposed[-1, -1] = bc.right.at(t)
    if not mask.any():
        return u
    if ad.is_tensor(u):
        return ad.where(mask, imposed, u)
    out = np.array(u, dtype=float, copy=True)
    out[mask] = imposed[mask]
    return out


def gauss_values(u, disc: Discretization) -> np.ndarray:
    return apply_kernel(disc.kernels[0], np.asarray(u, dtype=float))


def total_mass(u, disc: Discretization) -> float:
    uq = gauss_values(u, disc)
    return float(0.5 * disc.mesh.h * np.sum(uq * disc.basis.rule.weights))


def element_means(u, disc: Discretization) -> np.ndarray:
    uq = gauss_values(u, disc)
    return 0.5 * (uq * disc.basis.rule.weights).sum(axis=1)


def total_variation(u) -> float:
    """Sum of absolute differences between consecutive DOF values, interface jumps included."""
    flat = np.asarray(u, dtype=float).ravel()
    return float(np.abs(np.diff(flat)).sum())
