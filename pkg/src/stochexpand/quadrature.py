"""Composite Gauss-Legendre quadrature with panel splitting at breakpoints.

All integrals in the package go through this module.  Panels are split at
every breakpoint of the integrand (Haar/Walsh jumps), which makes piecewise
polynomial integrands exact.  Nested simplex integrals are built from
running primitives F(x) = int_a^x f, evaluated either on the grid nodes
(cached, cheap) or at arbitrary points (fresh sub-quadrature).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import QuadratureError

__all__ = [
    "QuadratureSpec",
    "PanelGrid",
    "Primitive",
    "integrate",
    "nested_simplex_integral",
    "adaptive",
]


@dataclass(frozen=True)
class QuadratureSpec:
    """Composite Gauss-Legendre parameters and convergence targets."""

    order: int = 32
    min_panels: int = 4
    rel_tol: float = 1e-10
    abs_tol: float = 1e-14
    max_refinements: int = 12


DEFAULT_SPEC = QuadratureSpec()


def _panel_edges(a: float, b: float, breakpoints, min_panels: int) -> np.ndarray:
    """Sorted panel edges: breakpoints in (a, b), each gap split to the target width."""
    pts = [a, b]
    for x in breakpoints:
        if a < x < b:
            pts.append(float(x))
    pts = np.unique(np.asarray(pts, dtype=float))
    target = (b - a) / max(min_panels, 1)
    edges = [pts[0]]
    for left, right in zip(pts[:-1], pts[1:]):
        nsub = max(1, int(np.ceil((right - left) / target - 1e-12)))
        edges.extend(np.linspace(left, right, nsub + 1)[1:])
    return np.asarray(edges)


class PanelGrid:
    """Fixed-order Gauss-Legendre nodes on a set of panels.

    Exposes plain integration over [a, b] and the machinery for running
    primitives: for each node x the partial integral over [panel_start, x]
    is computed with a scaled copy of the reference rule ("subnodes").
    """

    def __init__(self, edges: np.ndarray, order: int):
        self.edges = np.asarray(edges, dtype=float)
        self.order = order
        ref_x, ref_w = np.polynomial.legendre.leggauss(order)
        self._ref_u = (ref_x + 1.0) / 2.0  # reference nodes on [0, 1]
        self._ref_w = ref_w / 2.0
        a = self.edges[:-1][:, None]
        b = self.edges[1:][:, None]
        self.nodes = a + (b - a) * self._ref_u[None, :]  # (M, g)
        self.weights = (b - a) * self._ref_w[None, :]
        # subnodes[m, i, r]: rule on [edge_m, node_{m,i}]
        span = self.nodes - a  # (M, g)
        self.subnodes = a[:, :, None] + span[:, :, None] * self._ref_u[None, None, :]
        self.subweights = span[:, :, None] * self._ref_w[None, None, :]

    @property
    def n_panels(self) -> int:
        return len(self.edges) - 1

    def refined(self) -> "PanelGrid":
        """Grid with every panel split in half."""
        mids = (self.edges[:-1] + self.edges[1:]) / 2.0
        edges = np.sort(np.concatenate([self.edges, mids]))
        return PanelGrid(edges, self.order)

    def eval_on_nodes(self, f) -> np.ndarray:
        return f(self.nodes.ravel()).reshape(self.nodes.shape)

    def integrate_values(self, node_vals: np.ndarray) -> float:
        return float(np.sum(self.weights * node_vals))

    def primitive_node_values(self, node_vals, sub_vals) -> np.ndarray:
        """Values of F(x) = int_{a}^{x} f at every grid node, from f samples."""
        panel_ints = np.sum(self.weights * node_vals, axis=1)
        prefix = np.concatenate([[0.0], np.cumsum(panel_ints)])[:-1]
        partial = np.sum(self.subweights * sub_vals, axis=2)
        return prefix[:, None] + partial


class Primitive:
    """Running primitive F(x) = int over [grid start, x] of an integrand.

    Node values are cached; arbitrary-point evaluation re-integrates the
    tail panel with a fresh scaled rule (needed by nested levels).
    """

    def __init__(self, grid: PanelGrid, f, node_vals=None, sub_vals=None):
        self.grid = grid
        self.f = f
        if node_vals is None:
            node_vals = grid.eval_on_nodes(f)
        if sub_vals is None:
            sub_vals = f(grid.subnodes.ravel()).reshape(grid.subnodes.shape)
        panel_ints = np.sum(grid.weights * node_vals, axis=1)
        self._prefix = np.concatenate([[0.0], np.cumsum(panel_ints)])
        self.node_values = grid.primitive_node_values(node_vals, sub_vals)

    def at(self, x) -> np.ndarray:
        return self(x)

    def __call__(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        edges = self.grid.edges
        idx = np.clip(np.searchsorted(edges, x, side="right") - 1, 0, self.grid.n_panels - 1)
        a = edges[idx]
        span = x - a
        u = self.grid._ref_u
        pts = a[:, None] + span[:, None] * u[None, :]
        w = span[:, None] * self.grid._ref_w[None, :]
        partial = np.sum(w * self.f(pts.ravel()).reshape(pts.shape), axis=1)
        return self._prefix[idx] + partial


def _converged(cur, prev, spec: QuadratureSpec):
    err = float(np.max(np.abs(np.asarray(cur) - np.asarray(prev))))
    scale = float(np.max(np.abs(np.asarray(cur))))
    return err, err <= max(spec.abs_tol, spec.rel_tol * max(scale, 1.0))


def adaptive(value_on_grid, a: float, b: float, breakpoints=(), spec: QuadratureSpec = DEFAULT_SPEC):
    """Evaluate value_on_grid(grid) on successively refined grids until stable.

    Returns (value, error_estimate, grid).  Raises QuadratureError (carrying
    the partial value) if max_refinements is exhausted.
    """
    grid = PanelGrid(_panel_edges(a, b, breakpoints, spec.min_panels), spec.order)
    prev = value_on_grid(grid)
    for _ in range(spec.max_refinements):
        grid = grid.refined()
        cur = value_on_grid(grid)
        err, ok = _converged(cur, prev, spec)
        if ok:
            return cur, err, grid
        prev = cur
    raise QuadratureError(
        f"quadrature did not converge after {spec.max_refinements} refinements "
        f"(last change {err:.3e})",
        partial=cur,
        error_estimate=err,
    )


def integrate(f, a: float, b: float, breakpoints=(), spec: QuadratureSpec = DEFAULT_SPEC):
    """Adaptive integral of f over [a, b]; returns (value, error_estimate)."""
    value, err, _ = adaptive(lambda g: g.integrate_values(g.eval_on_nodes(f)), a, b, breakpoints, spec)
    return float(value), err


def nested_simplex_integral(factors, a: float, b: float, breakpoints=(), spec: QuadratureSpec = DEFAULT_SPEC):
    """Iterated integral of factors f_1..f_k over the simplex a < t_1 < ... < t_k < b.

    Computes int_a^b f_k(s) int_a^s f_{k-1}(u) ... ds via chained running
    primitives.  Returns (value, error_estimate).
    """

    def value_on(grid: PanelGrid) -> float:
        inner = None
        for f in factors[:-1]:
            if inner is None:
                integrand = f
            else:
                integrand = _product(f, inner)
            inner = Primitive(grid, integrand)
        top = factors[-1]
        node_vals = grid.eval_on_nodes(top)
        if inner is not None:
            node_vals = node_vals * inner.node_values
        return grid.integrate_values(node_vals)

    value, err, _ = adaptive(value_on, a, b, breakpoints, spec)
    return float(value), err


def _product(f, g):
    return lambda x: f(x) * g(x)
