"""Reference-element shape functions, Gauss rules and convolution kernels.

Gauss-point values of a nodal field are obtained by sliding a filter of width
``N_p`` with stride ``N_p`` over the flattened DOF vector; the filter taps are
the shape-function values at the Gauss point. For a field stored as a
``(K, N_p)`` block array this is exactly ``field @ kernel.T``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from dgshock.mesh import Mesh1D, element_of, reference_nodes

SUPPORTED_GAUSS_POINTS = (1, 2, 3, 4, 5)


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray

    @property
    def n_points(self) -> int:
        return self.points.size

    def integrate(self, f) -> float:
        """Integrate ``f`` over the reference interval [-1, 1]."""
        return float(np.dot(self.weights, f(self.points)))


@dataclass(frozen=True)
class BasisTable:
    rule: QuadratureRule
    nodes: np.ndarray
    values: np.ndarray  # (n_q, N_p)
    derivs: np.ndarray  # (n_q, N_p), d/dxi
    endpoint_values: np.ndarray  # (2, N_p): rows are xi = -1, xi = +1

    @property
    def N_p(self) -> int:
        return self.nodes.size

    def evaluate(self, xi) -> np.ndarray:
        return lagrange_values(self.nodes, xi)


@dataclass(frozen=True)
class ConvKernel:
    weights: np.ndarray  # (n_q, N_p)

    @property
    def stride(self) -> int:
        return self.weights.shape[1]

    def __call__(self, field):
        return apply_kernel(self, field)


def gauss_rule(n_points: int) -> QuadratureRule:
    if n_points not in SUPPORTED_GAUSS_POINTS:
        raise ValueError(f"unsupported Gauss rule size {n_points}; choose from {SUPPORTED_GAUSS_POINTS}")
    points, weights = np.polynomial.legendre.leggauss(n_points)
    points.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(points, weights)


def lagrange_values(nodes: np.ndarray, xi) -> np.ndarray:
    """Lagrange polynomials on ``nodes`` evaluated at ``xi``; shape (len(xi), len(nodes))."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    out = np.ones((xi.size, nodes.size))
    for n, xn in enumerate(nodes):
        for m, xm in enumerate(nodes):
            if m != n:
                out[:, n] *= (xi - xm) / (xn - xm)
    return out


def lagrange_derivatives(nodes: np.ndarray, xi) -> np.ndarray:
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    out = np.zeros((xi.size, nodes.size))
    for n, xn in enumerate(nodes):
        for j, xj in enumerate(nodes):
            if j == n:
                continue
            term = np.full(xi.size, 1.0 / (xn - xj))
            for m, xm in enumerate(nodes):
                if m != n and m != j:
                    term *= (xi - xm) / (xn - xm)
            out[:, n] += term
    return out


def lagrange_basis(N_p: int, rule: QuadratureRule) -> BasisTable:
    nodes = reference_nodes(N_p)
    if N_p == 2:
        # closed forms keep the linear case free of round-off from the product formula
        xi = rule.points
        values = np.stack([(1.0 - xi) / 2.0, (1.0 + xi) / 2.0], axis=1)
        derivs = np.tile([-0.5, 0.5], (xi.size, 1))
        ends = np.array([[1.0, 0.0], [0.0, 1.0]])
    else:
        values = lagrange_values(nodes, rule.points)
        derivs = lagrange_derivatives(nodes, rule.points)
        ends = lagrange_values(nodes, [-1.0, 1.0])
    for a in (nodes, values, derivs, ends):
        a.setflags(write=False)
    return BasisTable(rule, nodes, values, derivs, ends)


def linear_basis(rule: QuadratureRule) -> BasisTable:
    return lagrange_basis(2, rule)


def make_kernels(basis: BasisTable) -> tuple[ConvKernel, ConvKernel]:
    return ConvKernel(basis.values), ConvKernel(basis.derivs)


def apply_kernel(kernel: ConvKernel, field):
    """Per-element Gauss-point values, shape (K, n_q).

    Works on plain arrays and on autodiff tensors alike.
    """
    return field @ kernel.weights.T


def apply_kernel_loop(kernel: ConvKernel, field: np.ndarray) -> np.ndarray:
    """Reference implementation of :func:`apply_kernel` as an explicit strided sweep."""
    flat = np.asarray(field, dtype=float).ravel()
    stride = kernel.stride
    K = flat.size // stride
    out = np.zeros((K, kernel.weights.shape[0]))
    for k in range(K):
        window = flat[k * stride:(k + 1) * stride]
        for q in range(kernel.weights.shape[0]):
            acc = 0.0
            for n in range(stride):
                acc += kernel.weights[q, n] * window[n]
            out[k, q] = acc
    return out


def interpolate(field: np.ndarray, mesh: Mesh1D, basis: BasisTable, x: float, side: int = -1) -> float:
    """Evaluate the piecewise-polynomial field at ``x``.

    At interfaces the left-element trace is returned unless ``side=+1``.
    """
    field = np.asarray(field, dtype=float).reshape(mesh.shape)
    k = element_of(mesh, x)
    if side > 0 and k < mesh.K - 1 and x == mesh.element_bounds[k, 1]:
        k += 1
    xa, xb = mesh.element_bounds[k]
    xi = np.clip(2.0 * (x - xa) / (xb - xa) - 1.0, -1.0, 1.0)
    return float(basis.evaluate(xi)[0] @ field[k])


def node_sides(mesh: Mesh1D) -> np.ndarray:
    """Which one-sided limit each node samples: +1 (from the right) for the
    first node of an element, -1 for the last, 0 for interior nodes."""
    sides = np.zeros(mesh.shape, dtype=int)
    sides[:, 0] = 1
    sides[:, -1] = -1
    return sides


def project_initial_condition(u0, mesh: Mesh1D, basis: BasisTable) -> np.ndarray:
    """Nodal interpolation of ``u0(x, side)`` onto the DG space.

    ``side`` tells a piecewise ``u0`` which one-sided limit to return at a
    breakpoint; smooth functions can ignore it.
    """
    nodes = mesh.to_physical(basis.nodes)
    nodes[:, 0] = mesh.element_bounds[:, 0]
    nodes[:, -1] = mesh.element_bounds[:, 1]
    values = np.asarray(u0(nodes, node_sides(mesh)), dtype=float)
    return np.broadcast_to(values, mesh.shape).copy()
