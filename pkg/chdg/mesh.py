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
Uniform triangulations of the square [-1, 1]^2 with full edge topology.
"""
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from chdg.exceptions import MeshError

DOMAIN = (-1.0, 1.0)
DOMAIN_AREA = 4.0

# local edge l is opposite local vertex l
LOCAL_EDGES = np.array([[1, 2], [2, 0], [0, 1]])


def _frozen(array):
    array = np.ascontiguousarray(array)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class EdgeSet:
    """
    Edges with their owning cells.  For interior edges ``cells`` holds K, the
    neighbour with the bigger global label, ``neighbors`` holds K', and
    ``normals`` point out of K, so that [v] = v|K - v|K'.  Boundary edges
    have ``neighbors`` set to -1 and outward normals.
    """
    vertices: np.ndarray
    cells: np.ndarray
    neighbors: np.ndarray
    normals: np.ndarray
    lengths: np.ndarray

    def __len__(self):
        return len(self.cells)


@dataclass(frozen=True, eq=False)
class Mesh:
    n: int
    vertices: np.ndarray
    cells: np.ndarray
    interior_edges: EdgeSet
    boundary_edges: EdgeSet
    h: float

    @property
    def num_cells(self):
        return len(self.cells)

    @property
    def num_vertices(self):
        return len(self.vertices)

    @cached_property
    def cell_vertices(self):
        return _frozen(self.vertices[self.cells])

    @cached_property
    def jacobians(self):
        """
        B_K with x = v0 + B_K xi, columns v1 - v0 and v2 - v0.
        """
        v = self.cell_vertices
        return _frozen(np.stack([v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]], axis=-1))

    @cached_property
    def determinants(self):
        B = self.jacobians
        return _frozen(B[:, 0, 0] * B[:, 1, 1] - B[:, 0, 1] * B[:, 1, 0])

    @cached_property
    def inverse_jacobians(self):
        return _frozen(np.linalg.inv(self.jacobians))

    @cached_property
    def gradient_maps(self):
        """
        B_K^{-T}, mapping reference gradients to physical gradients.
        """
        return _frozen(np.transpose(self.inverse_jacobians, (0, 2, 1)))

    @cached_property
    def cell_areas(self):
        return _frozen(0.5 * np.abs(self.determinants))

    @cached_property
    def diameters(self):
        v = self.cell_vertices
        lengths = np.linalg.norm(v[:, LOCAL_EDGES[:, 1]] - v[:, LOCAL_EDGES[:, 0]], axis=-1)
        return _frozen(lengths.max(axis=1))

    @cached_property
    def centroids(self):
        return _frozen(self.cell_vertices.mean(axis=1))

    def reference_coordinates(self, cells, points):
        """
        Reference coordinates (xi1, xi2) of physical ``points`` (..., 2) in
        ``cells`` (same leading shape).
        """
        cells = np.asarray(cells)
        origin = self.cell_vertices[cells, 0]
        return np.einsum(
            '...ij,...j->...i',
            self.inverse_jacobians[cells],
            np.asarray(points, dtype=float) - origin,
        )

    def locate(self, points):
        """
        Owning cell and barycentric coordinates of each point of the square.
        Points on shared edges go to either neighbour.
        """
        points = np.asarray(points, dtype=float)
        spacing = (DOMAIN[1] - DOMAIN[0]) / self.n
        scaled = (points - DOMAIN[0]) / spacing
        ij = np.clip(np.floor(scaled), 0, self.n - 1).astype(np.int64)
        local = scaled - ij
        upper = (local[..., 1] > local[..., 0]).astype(np.int64)
        cells = 2 * (ij[..., 1] * self.n + ij[..., 0]) + upper
        xi = self.reference_coordinates(cells, points)
        bary = np.concatenate([1.0 - xi.sum(axis=-1, keepdims=True), xi], axis=-1)
        return cells, bary


def _edge_topology(vertices, cells):
    num_cells = len(cells)
    pairs = np.sort(cells[:, LOCAL_EDGES].reshape(-1, 2), axis=1)
    owners = np.repeat(np.arange(num_cells), 3)
    keys, inverse, counts = np.unique(
        pairs, axis=0, return_inverse=True, return_counts=True,
    )
    inverse = inverse.reshape(-1)
    if counts.max() > 2:
        raise MeshError('an edge is shared by more than two cells')
    order = np.argsort(inverse, kind='stable')
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    first = owners[order[starts]]
    second = owners[order[np.minimum(starts + 1, len(order) - 1)]]

    centroids = vertices[cells].mean(axis=1)

    def build(mask, own, other):
        ev = keys[mask]
        a = vertices[ev[:, 0]]
        b = vertices[ev[:, 1]]
        tangent = b - a
        lengths = np.linalg.norm(tangent, axis=1)
        normals = np.column_stack([tangent[:, 1], -tangent[:, 0]]) / lengths[:, None]
        outward = np.einsum('ij,ij->i', normals, 0.5 * (a + b) - centroids[own])
        normals[outward < 0] *= -1.0
        return EdgeSet(
            vertices=_frozen(ev),
            cells=_frozen(own),
            neighbors=_frozen(other),
            normals=_frozen(normals),
            lengths=_frozen(lengths),
        )

    interior = counts == 2
    boundary = counts == 1
    # owners come out in increasing order, so ``second`` has the bigger label
    interior_edges = build(interior, second[interior], first[interior])
    boundary_edges = build(
        boundary, first[boundary], -np.ones(boundary.sum(), dtype=np.int64),
    )
    return interior_edges, boundary_edges


def build_uniform_mesh(n):
    """
    Split each of the n x n squares of side 2/n along its lower-left to
    upper-right diagonal.  Cell 2*(j*n + i) is the lower-right triangle of
    square (i, j) and cell 2*(j*n + i) + 1 the upper-left one, both
    counterclockwise; refining n -> 2n gives nested meshes.
    """
    if int(n) != n or n < 1:
        raise MeshError('mesh subdivisions must be a positive integer, got %r' % (n,))
    n = int(n)
    coords = np.linspace(DOMAIN[0], DOMAIN[1], n + 1)
    xx, yy = np.meshgrid(coords, coords, indexing='xy')
    vertices = np.column_stack([xx.ravel(), yy.ravel()])

    j, i = np.meshgrid(np.arange(n), np.arange(n), indexing='ij')
    v00 = (j * (n + 1) + i).ravel()
    v10 = v00 + 1
    v01 = v00 + (n + 1)
    v11 = v01 + 1
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    cells = np.stack([lower, upper], axis=1).reshape(-1, 3)

    interior_edges, boundary_edges = _edge_topology(vertices, cells)
    v = vertices[cells]
    diameters = np.linalg.norm(
        v[:, LOCAL_EDGES[:, 1]] - v[:, LOCAL_EDGES[:, 0]], axis=-1,
    ).max(axis=1)
    return Mesh(
        n=n,
        vertices=_frozen(vertices),
        cells=_frozen(cells.astype(np.int64)),
        interior_edges=interior_edges,
        boundary_edges=boundary_edges,
        h=float(diameters.max()),
    )
