"""
Gauss rules on the reference triangle and the reference edge.

Triangle rules are collapsed (Duffy) products of a Gauss-Legendre rule and a
Gauss-Jacobi rule whose weight absorbs the collapse Jacobian, so every rule
has positive weights and is exact to the requested degree.
"""
from dataclasses import dataclass

import numpy as np
from scipy.special import roots_jacobi

from chdg.exceptions import QuadratureError

MAX_TRIANGLE_DEGREE = 30
MAX_EDGE_DEGREE = 31


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    # barycentric (npts, 3) on triangles, reference coordinate s in [0, 1]
    # (npts,) on edges
    points: np.ndarray
    weights: np.ndarray
    degree: int

    def __len__(self):
        return len(self.weights)

    @property
    def reference_points(self):
        """
        Reference-element coordinates (xi1, xi2) of a triangle rule.
        """
        return self.points[:, 1:3]


def _check_degree(degree, maximum):
    if int(degree) != degree or degree < 1 or degree > maximum:
        raise QuadratureError(
            'unsupported quadrature degree %r (1..%d)' % (degree, maximum)
        )


def _gauss_points(degree):
    return int(degree) // 2 + 1


def triangle_quadrature(degree):
    """
    Rule on the triangle (0,0), (1,0), (0,1); weights sum to its area 1/2.
    """
    _check_degree(degree, MAX_TRIANGLE_DEGREE)
    m = _gauss_points(degree)
    x, wx = roots_jacobi(m, 0.0, 0.0)
    y, wy = roots_jacobi(m, 1.0, 0.0)
    u = 0.5 * (1.0 + x)
    v = 0.5 * (1.0 + y)
    wu = 0.5 * wx
    wv = 0.25 * wy
    uu, vv = np.meshgrid(u, v, indexing='ij')
    xi1 = (uu * (1.0 - vv)).ravel()
    xi2 = vv.ravel()
    weights = np.outer(wu, wv).ravel()
    points = np.column_stack([1.0 - xi1 - xi2, xi1, xi2])
    return QuadratureRule(points=points, weights=weights, degree=int(degree))


def edge_quadrature(degree):
    """
    Gauss-Legendre rule on [0, 1]; weights sum to 1.
    """
    _check_degree(degree, MAX_EDGE_DEGREE)
    x, w = roots_jacobi(_gauss_points(degree), 0.0, 0.0)
    return QuadratureRule(
        points=0.5 * (1.0 + x),
        weights=0.5 * w,
        degree=int(degree),
    )
