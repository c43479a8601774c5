"""Uniform 1-D element partition with per-element (discontinuous) DOF storage.

Every interior interface carries two DOFs, the right node of the left element
and the left node of the right element, so the represented field may jump
there. The two domain ends additionally get a single ghost slot each that holds
exterior trace data (boundary values) for the interface fluxes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Mesh1D:
    x_min: float
    x_max: float
    K: int
    N_p: int = 2
    h: float = field(init=False)
    element_bounds: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not self.x_max > self.x_min:
            raise ValueError(f"x_max must exceed x_min, got [{self.x_min}, {self.x_max}]")
        if int(self.K) != self.K or self.K < 1:
            raise ValueError(f"element count must be a positive integer, got {self.K}")
        if int(self.N_p) != self.N_p or self.N_p < 2:
            raise ValueError(f"need at least 2 nodes per element, got {self.N_p}")
        object.__setattr__(self, "K", int(self.K))
        object.__setattr__(self, "N_p", int(self.N_p))
        h = (self.x_max - self.x_min) / self.K
        k = np.arange(self.K)
        bounds = np.empty((self.K, 2))
        bounds[:, 0] = self.x_min + k * h
        bounds[:, 1] = self.x_min + (k + 1) * h
        # pin the outer ends exactly so the union is [x_min, x_max]
        bounds[-1, 1] = self.x_max
        bounds.setflags(write=False)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "element_bounds", bounds)

    @property
    def n_dofs(self) -> int:
        return self.K * self.N_p

    @property
    def shape(self) -> tuple[int, int]:
        return (self.K, self.N_p)

    @property
    def element_midpoints(self) -> np.ndarray:
        return 0.5 * (self.element_bounds[:, 0] + self.element_bounds[:, 1])

    def to_physical(self, xi) -> np.ndarray:
        """Map reference coordinates in [-1, 1] to every element, shape (K, len(xi))."""
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        xa = self.element_bounds[:, :1]
        xb = self.element_bounds[:, 1:]
        return 0.5 * (xa + xb) + 0.5 * (xb - xa) * xi[None, :]


@dataclass(frozen=True)
class DofLayout:
    """Node coordinates and trace bookkeeping for a :class:`Mesh1D`.

    ``interfaces[i] = (right_trace_dof, left_trace_dof)`` for interior interface
    ``i`` (between elements ``i`` and ``i + 1``), using flat DOF indices
    ``k * N_p + n``. ``ghost`` holds one exterior value per domain end.
    """

    nodes: np.ndarray
    interfaces: np.ndarray
    ghost_slots: tuple[str, str] = ("x_min", "x_max")

    @property
    def n_dofs(self) -> int:
        return self.nodes.size


def reference_nodes(N_p: int) -> np.ndarray:
    """Equispaced Lagrange nodes on [-1, 1] (the two endpoints for N_p = 2)."""
    return np.linspace(-1.0, 1.0, N_p)


def build_mesh(x_min: float, x_max: float, K: int, N_p: int = 2) -> tuple[Mesh1D, DofLayout]:
    mesh = Mesh1D(float(x_min), float(x_max), K, N_p)
    nodes = mesh.to_physical(reference_nodes(mesh.N_p))
    # shared interface coordinates must be bitwise identical on both sides
    nodes[:, 0] = mesh.element_bounds[:, 0]
    nodes[:, -1] = mesh.element_bounds[:, 1]
    nodes.setflags(write=False)
    k = np.arange(mesh.K - 1)
    interfaces = np.stack([k * mesh.N_p + mesh.N_p - 1, (k + 1) * mesh.N_p], axis=1)
    interfaces.setflags(write=False)
    return mesh, DofLayout(nodes=nodes, interfaces=interfaces)


def element_of(mesh: Mesh1D, x: float) -> int:
    """Index of the element containing ``x``; interface points go to the left element."""
    if not mesh.x_min <= x <= mesh.x_max:
        raise ValueError(f"x={x} outside [{mesh.x_min}, {mesh.x_max}]")
    rights = mesh.element_bounds[:, 1]
    k = int(np.searchsorted(rights, x, side="left"))
    return min(k, mesh.K - 1)
