"""The target manifold: the round unit sphere S^{m-1} in R^m.

Only round unit spheres are supported. All computations in the rest of the
package specialize to m = 4, the 3-sphere, where the closed-form checks
live; the operations here are written for general m >= 3 anyway since they
cost nothing extra.
"""

from dataclasses import dataclass

import numpy as np

from .errors import BadParam, NearZero
from .util import row_norms

_NEAR_ZERO = 1e-9
_UNIT_TOL = 1e-9
_TANGENT_TOL = 1e-9


@dataclass(frozen=True)
class AmbientSphere:
    """Unit sphere S^{m-1} subset of R^m.

    Pure functions throughout; instances are immutable and safe to share.
    """

    m: int = 4
    radius: float = 1.0

    def __post_init__(self):
        if self.m < 3:
            raise BadParam(f"ambient dimension must be >= 3, got {self.m}")
        if self.radius != 1.0:
            raise BadParam("only the unit sphere is supported")

    def _check_shape(self, y):
        y = np.asarray(y, dtype=np.float64)
        if y.shape[-1] != self.m:
            raise BadParam(f"expected {self.m}-vectors, got shape {y.shape}")
        return y

    def project(self, y):
        """Radial projection y / |y| onto the sphere."""
        y = self._check_shape(y)
        n = row_norms(y)
        if np.any(n <= _NEAR_ZERO):
            raise NearZero("cannot project a vector of near-zero length")
        return y / n[..., None]

    def _check_unit(self, y):
        y = self._check_shape(y)
        if np.any(np.abs(row_norms(y) - 1.0) > _UNIT_TOL):
            raise BadParam("base point is not on the unit sphere")
        return y

    def tangent_project(self, y, v):
        """Orthogonal projection of v onto the tangent space at y."""
        y = self._check_unit(y)
        v = self._check_shape(v)
        return v - np.sum(v * y, axis=-1)[..., None] * y

    def second_fundamental(self, y, u, v):
        """Second fundamental form of the unit sphere: A(y)(u, v) = -(u.v) y."""
        y = self._check_unit(y)
        u = self._check_shape(u)
        v = self._check_shape(v)
        for t in (u, v):
            if np.any(np.abs(np.sum(t * y, axis=-1)) > _TANGENT_TOL * np.maximum(row_norms(t), 1.0)):
                raise BadParam("arguments of the second fundamental form must be tangent")
        return -np.sum(u * v, axis=-1)[..., None] * y

    def retract(self, y, v):
        """Step from y along tangent v and renormalize.

        First-order equivalent to the exponential map; the output is exactly
        unit-norm, which is what keeps flows on the constraint.
        """
        y = self._check_unit(y)
        v = self._check_shape(v)
        if np.any(np.abs(np.sum(v * y, axis=-1)) > _TANGENT_TOL * np.maximum(row_norms(v), 1.0)):
            raise BadParam("retraction direction must be tangent")
        z = y + v
        n = row_norms(z)
        if np.any(n <= _NEAR_ZERO):
            raise NearZero("retraction step leads through the origin")
        return z / n[..., None]

    def tangent_projector(self, y):
        """The matrix P_y = I - y y^T (symmetric, idempotent, rank m-1)."""
        y = self._check_unit(y)
        return np.eye(self.m) - np.outer(y, y)


S3 = AmbientSphere(4)
