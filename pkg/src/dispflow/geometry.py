"""Embedded target manifolds.

Three targets ship, each with an explicit isometric embedding into R^d:

``s2``           unit sphere in R^3, J_q X = q x X (Kaehler, K = 1)
``t2-clifford``  flat Clifford torus in R^4, radius 1/sqrt(2) per factor (Kaehler, K = 0)
``s6``           unit sphere in R^7 with the octonionic J_q X = q x_7 X (not Kaehler)

All operations accept a single point of shape ``(d,)`` or a batch ``(n, d)``.

Second fundamental form sign: for a curve v on the manifold the tangential
part of v_xx is ``v_xx + A(v)(v_x, v_x)``, so A is minus the normal part of
the acceleration.  On the unit sphere this gives ``A(q)(X, Y) = (X.Y) q``.

J orientation is pinned once per target; the opposite orientation corresponds
to the time reversal composed with x -> -x and is deliberately not exposed.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import kernels


class TubeExceeded(ValueError):
    """A point left the tubular neighbourhood on which projection is defined."""

    def __init__(self, max_distance, tube_radius):
        self.max_distance = float(max_distance)
        self.tube_radius = float(tube_radius)
        super().__init__(
            f"distance {self.max_distance:.3e} from the manifold exceeds tube radius {self.tube_radius:.3e}"
        )


class ManifoldKind(str, Enum):
    SPHERE2 = "Sphere2"
    CLIFFORD_TORUS2 = "CliffordTorus2"
    SPHERE6 = "Sphere6"


TARGET_NAMES = {
    "s2": ManifoldKind.SPHERE2,
    "t2-clifford": ManifoldKind.CLIFFORD_TORUS2,
    "s6": ManifoldKind.SPHERE6,
}


def _as_batch(a):
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        return np.ascontiguousarray(a[None, :]), True
    return np.ascontiguousarray(a), False


def _unbatch(out, single):
    return out[0] if single else out


@dataclass(frozen=True)
class TargetManifold:
    kind: ManifoldKind
    ambient_dim: int
    gauss_curvature: float | None
    tube_radius: float
    is_kahler: bool

    @property
    def name(self):
        return {v: k for k, v in TARGET_NAMES.items()}[self.kind]

    # ------------------------------------------------------------ projection

    def _project_raw(self, Q):
        if self.kind is ManifoldKind.CLIFFORD_TORUS2:
            return kernels.torus_project(Q)
        return kernels.sphere_project(Q)

    def distance(self, Q):
        """Euclidean distance from each point to the embedded manifold."""
        Qb, single = _as_batch(Q)
        _, dist = self._project_raw(Qb)
        return dist[0] if single else dist

    def project(self, Q):
        """Nearest-point projection; raises :class:`TubeExceeded` outside the tube."""
        Qb, single = _as_batch(Q)
        P, dist = self._project_raw(Qb)
        worst = float(np.max(dist)) if dist.size else 0.0
        if not worst < self.tube_radius:
            raise TubeExceeded(worst, self.tube_radius)
        return _unbatch(P, single)

    def constraint_violation(self, Q):
        return float(np.max(self.distance(Q)))

    # ------------------------------------------------------- tangent calculus

    def tangent_project(self, q, X):
        """Orthogonal projection of ambient X onto T_q w(N)."""
        qb, single = _as_batch(q)
        Xb, _ = _as_batch(X)
        if self.kind is ManifoldKind.CLIFFORD_TORUS2:
            out = kernels.torus_tangent(qb, Xb)
        else:
            out = kernels.sphere_tangent(qb, Xb)
        return _unbatch(out, single)

    def normal_project(self, q, X):
        return np.asarray(X, dtype=float) - self.tangent_project(q, X)

    def second_fundamental_form(self, q, X, Y):
        qb, single = _as_batch(q)
        Xb, _ = _as_batch(X)
        Yb, _ = _as_batch(Y)
        if self.kind is ManifoldKind.CLIFFORD_TORUS2:
            out = kernels.torus_sff(qb, Xb, Yb)
        else:
            out = kernels.sphere_sff(qb, Xb, Yb)
        return _unbatch(out, single)

    def complex_structure(self, q, X):
        """J_q X.  Normal components of X are annihilated."""
        qb, single = _as_batch(q)
        Xb, _ = _as_batch(X)
        if self.kind is ManifoldKind.SPHERE2:
            out = kernels.cross3(qb, Xb)
        elif self.kind is ManifoldKind.SPHERE6:
            out = kernels.cross7(qb, Xb)
        else:
            out = kernels.torus_J(qb, Xb)
        return _unbatch(out, single)


SPHERE2 = TargetManifold(ManifoldKind.SPHERE2, 3, 1.0, 0.5, True)
CLIFFORD_TORUS2 = TargetManifold(ManifoldKind.CLIFFORD_TORUS2, 4, 0.0, 1.0 / (2.0 * np.sqrt(2.0)), True)
SPHERE6 = TargetManifold(ManifoldKind.SPHERE6, 7, None, 0.5, False)

_BY_KIND = {
    ManifoldKind.SPHERE2: SPHERE2,
    ManifoldKind.CLIFFORD_TORUS2: CLIFFORD_TORUS2,
    ManifoldKind.SPHERE6: SPHERE6,
}


def get_target(name):
    """Look up a target by its config/CLI name (``s2``, ``t2-clifford``, ``s6``)."""
    if isinstance(name, TargetManifold):
        return name
    if isinstance(name, ManifoldKind):
        return _BY_KIND[name]
    try:
        return _BY_KIND[TARGET_NAMES[name]]
    except KeyError:
        raise ValueError(f"unknown target {name!r}; expected one of {sorted(TARGET_NAMES)}") from None


def cross7(x, y):
    """Seven-dimensional cross product from the octonion table in :mod:`kernels`."""
    xb, single = _as_batch(x)
    yb, _ = _as_batch(y)
    return _unbatch(kernels.cross7(xb, yb), single)
