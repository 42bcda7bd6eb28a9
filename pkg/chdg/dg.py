# -*- coding: utf-8 -*-
# ----------------------------------------------------------------------------
# $Id$
# ----------------------------------------------------------------------------
#
#    Copyright (C) 2009-2010 Caktus Consulting Group, LLC
#
#    This file is part of django-chdg.
#
#    django-chdg is published under a BSD-style license.
#
#    You should have received a copy of the BSD License along with django-chdg.
#    If not, see <http://www.opensource.org/licenses/bsd-license.php>.
#
"""
Broken polynomial spaces on the uniform mesh and assembly of the symmetric
interior penalty form, the mass form and the Cahn-Hilliard nonlinearity.

Every cell carries a nodal Lagrange basis of degree r, so a DG field is a
(num_cells, num_local) array of nodal values and the continuous subspace S_h
is the set of fields whose values agree at coincident nodes.
"""
import itertools
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import sparse

from chdg.exceptions import CellIndexError, SpaceMismatch
from chdg.quadrature import edge_quadrature, triangle_quadrature

SCHEMES = ('splitting', 'implicit')
BROKEN = 'broken'
CONTINUOUS = 'continuous'

# node coordinates are matched on this grid when building S_h
NODE_TOLERANCE = 1e-9


def default_penalty(degree):
    return 10.0 * degree * (degree + 1)


def volume_degree(degree):
    return max(2 * degree + 2, 4 * degree)


def edge_degree(degree):
    return 2 * degree + 2


class LagrangeElement(object):
    """
    Nodal basis of P_r on the reference triangle.  Vertex nodes come first
    in the cell's vertex order, the remaining nodes follow lexicographically.
    """

    def __init__(self, degree):
        if degree < 1:
            raise ValueError('polynomial degree must be at least 1')
        self.degree = degree
        r = degree
        indices = [
            (r - a - b, a, b)
            for b in range(r + 1) for a in range(r + 1 - b)
        ]
        vertices = [(r, 0, 0), (0, r, 0), (0, 0, r)]
        others = sorted(set(indices) - set(vertices), key=lambda x: (x[2], x[1]))
        self.nodes = np.array(vertices + others, dtype=float) / r
        self.exponents = [
            (a, total - a)
            for total in range(r + 1) for a in range(total, -1, -1)
        ]
        vandermonde = self._monomials(self.nodes[:, 1:3])
        self.coefficients = np.linalg.inv(vandermonde)

    def __len__(self):
        return len(self.nodes)

    def _monomials(self, xi):
        x, y = xi[..., 0], xi[..., 1]
        return np.stack([x ** a * y ** b for a, b in self.exponents], axis=-1)

    def _monomial_gradients(self, xi):
        x, y = xi[..., 0], xi[..., 1]
        zero = np.zeros_like(x)
        columns = []
        for a, b in self.exponents:
            dx = a * x ** (a - 1) * y ** b if a else zero
            dy = b * x ** a * y ** (b - 1) if b else zero
            columns.append(np.stack([dx, dy], axis=-1))
        return np.stack(columns, axis=-2)

    def tabulate(self, xi):
        """
        Basis values at reference points ``xi`` (..., 2) -> (..., num_local).
        """
        return self._monomials(np.asarray(xi, dtype=float)) @ self.coefficients

    def tabulate_gradients(self, xi):
        """
        Reference gradients -> (..., num_local, 2).
        """
        grads = self._monomial_gradients(np.asarray(xi, dtype=float))
        return np.einsum('...md,mk->...kd', grads, self.coefficients)


@dataclass(frozen=True, eq=False)
class EdgeTraces:
    """
    Traces of the basis on interior edges at edge quadrature points: values
    and normal derivatives from K (``left``) and K' (``right``), plus the
    physical quadrature weights.
    """
    left: np.ndarray
    right: np.ndarray
    left_gradients: np.ndarray
    right_gradients: np.ndarray
    left_normal: np.ndarray
    right_normal: np.ndarray
    weights: np.ndarray
    points: np.ndarray


class DGSpace(object):
    def __init__(self, mesh, degree=1):
        self.mesh = mesh
        self.degree = int(degree)
        self.element = LagrangeElement(self.degree)
        self.num_local = len(self.element)
        self.num_dofs = mesh.num_cells * self.num_local
        self.dofs = np.arange(self.num_dofs).reshape(mesh.num_cells, self.num_local)
        self.volume_rule = triangle_quadrature(volume_degree(self.degree))
        self.edge_rule = edge_quadrature(edge_degree(self.degree))

    def __repr__(self):
        return '<DGSpace n=%d r=%d dofs=%d>' % (
            self.mesh.n, self.degree, self.num_dofs,
        )

    @cached_property
    def node_coordinates(self):
        return np.einsum('ka,cad->ckd', self.element.nodes, self.mesh.cell_vertices)

    @cached_property
    def _continuous_numbering(self):
        keys = np.round(self.node_coordinates.reshape(-1, 2) / NODE_TOLERANCE)
        unique, inverse = np.unique(keys.astype(np.int64), axis=0, return_inverse=True)
        return inverse.reshape(-1), len(unique)

    @property
    def continuous_map(self):
        """
        Global S_h index of every broken degree of freedom.
        """
        return self._continuous_numbering[0]

    @property
    def num_continuous(self):
        return self._continuous_numbering[1]

    @cached_property
    def node_multiplicity(self):
        return np.bincount(self.continuous_map, minlength=self.num_continuous)

    def rule_tables(self, rule):
        xi = rule.reference_points
        return self.element.tabulate(xi), self.element.tabulate_gradients(xi)

    @cached_property
    def volume_values(self):
        return self.rule_tables(self.volume_rule)[0]

    @cached_property
    def volume_gradients(self):
        """
        Physical basis gradients (cells, points, local, 2).
        """
        dphi = self.rule_tables(self.volume_rule)[1]
        return np.einsum('cij,qlj->cqli', self.mesh.gradient_maps, dphi)

    @cached_property
    def volume_weights(self):
        return np.abs(self.mesh.determinants)[:, None] * self.volume_rule.weights[None, :]

    @cached_property
    def volume_points(self):
        return np.einsum(
            'qa,cad->cqd', self.volume_rule.points, self.mesh.cell_vertices,
        )

    def quadrature_tables(self, degree):
        """
        Values, physical gradients, weights and points for a triangle rule
        of the given degree (used for smooth integrands).
        """
        rule = triangle_quadrature(degree)
        phi, dphi = self.rule_tables(rule)
        grads = np.einsum('cij,qlj->cqli', self.mesh.gradient_maps, dphi)
        weights = np.abs(self.mesh.determinants)[:, None] * rule.weights[None, :]
        points = np.einsum('qa,cad->cqd', rule.points, self.mesh.cell_vertices)
        return phi, grads, weights, points

    @cached_property
    def traces(self):
        return self.edge_traces(self.edge_rule)

    def edge_traces(self, rule):
        mesh = self.mesh
        edges = mesh.interior_edges
        a = mesh.vertices[edges.vertices[:, 0]]
        b = mesh.vertices[edges.vertices[:, 1]]
        s = rule.points
        points = a[:, None, :] + s[None, :, None] * (b - a)[:, None, :]
        sides = []
        for cells in (edges.cells, edges.neighbors):
            xi = mesh.reference_coordinates(np.repeat(cells[:, None], len(s), axis=1), points)
            values = self.element.tabulate(xi)
            grads = np.einsum(
                'eij,eqlj->eqli', mesh.gradient_maps[cells], self.element.tabulate_gradients(xi),
            )
            normal = np.einsum('eqli,ei->eql', grads, edges.normals)
            sides.append((values, grads, normal))
        return EdgeTraces(
            left=sides[0][0],
            right=sides[1][0],
            left_gradients=sides[0][1],
            right_gradients=sides[1][1],
            left_normal=sides[0][2],
            right_normal=sides[1][2],
            weights=edges.lengths[:, None] * rule.weights[None, :],
            points=points,
        )

    def check_field(self, field):
        if field.space is not self:
            raise SpaceMismatch('field lives on %r, expected %r' % (field.space, self))


@dataclass(eq=False)
class DGField:
    space: DGSpace
    coefficients: np.ndarray
    tag: str = BROKEN

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=float).reshape(-1)
        if len(self.coefficients) != self.space.num_dofs:
            raise SpaceMismatch('expected %d coefficients, got %d' % (
                self.space.num_dofs, len(self.coefficients),
            ))
        if self.tag not in (BROKEN, CONTINUOUS):
            raise ValueError('unknown field tag %r' % self.tag)

    @property
    def local(self):
        return self.coefficients.reshape(self.space.mesh.num_cells, self.space.num_local)

    def copy(self):
        return DGField(self.space, self.coefficients.copy(), self.tag)

    def with_coefficients(self, coefficients, tag=BROKEN):
        return DGField(self.space, coefficients, tag)

    def continuity_defect(self):
        """
        Largest spread of the coefficients attached to one geometric node.
        """
        space = self.space
        cmap = space.continuous_map
        high = np.full(space.num_continuous, -np.inf)
        low = np.full(space.num_continuous, np.inf)
        np.maximum.at(high, cmap, self.coefficients)
        np.minimum.at(low, cmap, self.coefficients)
        return float((high - low).max())

    def quadrature_values(self):
        return np.einsum('qi,ci->cq', self.space.volume_values, self.local)

    def integral(self):
        return float(np.sum(self.space.volume_weights * self.quadrature_values()))


def zero_field(space, tag=BROKEN):
    return DGField(space, np.zeros(space.num_dofs), tag)


def constant_field(space, value):
    return DGField(space, np.full(space.num_dofs, float(value)), CONTINUOUS)


def interpolate(space, func, continuous=False):
    """
    Nodal interpolant of ``func(x, y)`` (vectorized over arrays).
    """
    coords = space.node_coordinates
    values = np.broadcast_to(
        np.asarray(func(coords[..., 0], coords[..., 1]), dtype=float),
        coords.shape[:-1],
    )
    return DGField(space, values.copy(), CONTINUOUS if continuous else BROKEN)


def _check_cells(space, cells):
    cells = np.asarray(cells)
    if cells.size and (cells.min() < 0 or cells.max() >= space.mesh.num_cells):
        raise CellIndexError('cell index out of range 0..%d' % (space.mesh.num_cells - 1))
    return cells


def field_values(field, cells, bary):
    """
    Values of ``field`` at barycentric points ``bary`` (..., 3) of ``cells``.
    """
    cells = _check_cells(field.space, cells)
    bary = np.asarray(bary, dtype=float)
    phi = field.space.element.tabulate(bary[..., 1:3])
    return np.einsum('...l,...l->...', phi, field.local[cells])


def field_gradients(field, cells, bary):
    cells = _check_cells(field.space, cells)
    bary = np.asarray(bary, dtype=float)
    dphi = field.space.element.tabulate_gradients(bary[..., 1:3])
    ref = np.einsum('...ld,...l->...d', dphi, field.local[cells])
    return np.einsum('...ij,...j->...i', field.space.mesh.gradient_maps[cells], ref)


def eval_field(field, cell, bary):
    return float(field_values(field, int(cell), bary))


def broken_gradient(field, cell, bary):
    return field_gradients(field, int(cell), bary)


def _block_matrix(space, blocks, dofs=None):
    """
    Sparse matrix from dense local blocks (items, m, m) living on ``dofs``
    (items, m); defaults to the cell blocks.
    """
    if dofs is None:
        dofs = space.dofs
    m = dofs.shape[1]
    rows = np.repeat(dofs, m, axis=1).ravel()
    cols = np.tile(dofs, (1, m)).ravel()
    return sparse.coo_matrix(
        (np.asarray(blocks).ravel(), (rows, cols)),
        shape=(space.num_dofs, space.num_dofs),
    ).tocsr()


def assemble_weighted_mass(space, weights):
    """
    (w phi_j, phi_i) with ``weights`` given at the volume quadrature points
    (cells, points).
    """
    return _block_matrix(space, _mass_blocks(space, weights))


def _mass_blocks(space, weights=None):
    phi = space.volume_values
    w = space.volume_weights if weights is None else space.volume_weights * weights
    return np.einsum('cq,qi,qj->cij', w, phi, phi)


def assemble_mass(space):
    return _block_matrix(space, _mass_blocks(space))


def assemble_inverse_mass(space):
    """
    M^{-1}, block diagonal like M itself.
    """
    return _block_matrix(space, np.linalg.inv(_mass_blocks(space)))


def assemble_broken_stiffness(space):
    grads = space.volume_gradients
    blocks = np.einsum('cq,cqia,cqja->cij', space.volume_weights, grads, grads)
    return _block_matrix(space, blocks)


def _edge_dofs(space):
    edges = space.mesh.interior_edges
    return np.concatenate([space.dofs[edges.cells], space.dofs[edges.neighbors]], axis=1)


def _edge_jumps(traces):
    return np.concatenate([traces.left, -traces.right], axis=-1)


def assemble_jump_matrix(space, power=-1):
    """
    sum_e h_e^power int_e [u][v] over interior edges.
    """
    edges = space.mesh.interior_edges
    traces = space.traces
    jumps = _edge_jumps(traces)
    scale = (edges.lengths ** power)[:, None] * traces.weights
    blocks = np.einsum('eq,eqi,eqj->eij', scale, jumps, jumps)
    return _block_matrix(space, blocks, _edge_dofs(space))


def assemble_sipg(space, sigma0):
    """
    Symmetric interior penalty matrix A with x^T A y = a_h(u_x, u_y).  Only
    interior edges contribute, which weakly imposes homogeneous Neumann
    conditions.
    """
    if not sigma0 > 0:
        raise ValueError('penalty parameter must be positive, got %r' % (sigma0,))
    edges = space.mesh.interior_edges
    traces = space.traces
    jumps = _edge_jumps(traces)
    averages = 0.5 * np.concatenate([traces.left_normal, traces.right_normal], axis=-1)
    consistency = np.einsum('eq,eqi,eqj->eij', traces.weights, averages, jumps)
    penalty = np.einsum(
        'eq,eqi,eqj->eij',
        (sigma0 / edges.lengths)[:, None] * traces.weights, jumps, jumps,
    )
    edge_blocks = penalty - consistency - np.transpose(consistency, (0, 2, 1))
    return (
        assemble_broken_stiffness(space)
        + _block_matrix(space, edge_blocks, _edge_dofs(space))
    ).tocsr()


def _check_variant(variant):
    if variant not in SCHEMES:
        raise ValueError('unknown scheme variant %r' % (variant,))


def assemble_nonlinear(space, U, U_prev, variant):
    """
    Components (f^m, phi_i) with f^m = U^3 - U_prev (splitting) or
    f^m = U^3 - U (implicit), exact for the nodal basis.
    """
    _check_variant(variant)
    space.check_field(U)
    space.check_field(U_prev)
    u = U.quadrature_values()
    lagged = U_prev.quadrature_values() if variant == 'splitting' else u
    f = u ** 3 - lagged
    return np.einsum(
        'cq,qi->ci', space.volume_weights * f, space.volume_values,
    ).ravel()


def nonlinear_derivative_weights(U, variant):
    _check_variant(variant)
    u = U.quadrature_values()
    return 3.0 * u ** 2 - (1.0 if variant == 'implicit' else 0.0)


def assemble_nonlinear_jacobian(space, U, variant):
    """
    (f'(U) phi_j, phi_i), block diagonal per cell; f' = 3U^2 (splitting)
    or 3U^2 - 1 (implicit).
    """
    space.check_field(U)
    return assemble_weighted_mass(space, nonlinear_derivative_weights(U, variant))


def broken_h1_seminorm(field):
    grads = np.einsum('cqli,cl->cqi', field.space.volume_gradients, field.local)
    return float(np.sqrt(np.sum(field.space.volume_weights * np.sum(grads ** 2, axis=-1))))


def l2_norm(field):
    return float(np.sqrt(np.sum(field.space.volume_weights * field.quadrature_values() ** 2)))
