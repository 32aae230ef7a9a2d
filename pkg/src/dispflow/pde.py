"""Right-hand sides of the dispersive flow and its classical S^2 models.

Two assemblies of the same vector field are provided:

* :func:`rhs_intrinsic` uses covariant calculus along the map,
  ``a nabla^2 u_x + J nabla u_x + b g(u_x, u_x) u_x``;
* :func:`rhs_extrinsic` builds the ambient field term by term from ambient
  derivatives, the second fundamental form and J, with the parabolic block
  ``-eps (v_xxxx + ...)`` included when ``eps > 0``.

Agreement of the two is the main correctness check for both.
"""

from dataclasses import dataclass

import numpy as np

from .fields import (
    MapState,
    TangentSection,
    covariant_derivative,
    spectral_derivative,
    spectral_derivatives,
    velocity,
)
from .geometry import ManifoldKind, get_target


@dataclass(frozen=True)
class FlowCoefficients:
    a: float
    b: float
    epsilon: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.epsilon < 1.0:
            raise ValueError(f"epsilon must lie in [0, 1), got {self.epsilon}")

    @property
    def schrodinger_mode(self):
        """a = 0: only meaningful together with eps > 0."""
        return self.a == 0.0


def _unpack(v, target, length):
    if isinstance(v, MapState):
        return np.asarray(v.points), v.target, v.grid.length
    if target is None or length is None:
        raise TypeError("target and length are required when v is a raw array")
    return np.asarray(v, dtype=float), get_target(target), float(length)


def nonlinearity(v, c, target=None, length=None):
    """F(v) for on-manifold samples v, assembled exactly as the displayed sum.

    With T1 = v_xx + A(v_x, v_x) (= dw nabla u_x) and
    T2 = v_xxx + [A(v_x, v_x)]_x + A(T1, v_x) (= dw nabla^2 u_x):

        F = -eps { [A(v_x,v_x)]_xx + [A(T1, v_x)]_x + A(T2, v_x) }
            + a T2 + J T1 + b |v_x|^2 v_x
    """
    v, target, length = _unpack(v, target, length)
    vx, vxx, vxxx = spectral_derivatives(v, (1, 2, 3), length)
    A = target.second_fundamental_form
    Avv = A(v, vx, vx)
    Avv_x = spectral_derivative(Avv, 1, length)
    T1 = vxx + Avv
    B = A(v, T1, vx)
    T2 = vxxx + Avv_x + B
    speed2 = np.einsum("ij,ij->i", vx, vx)
    F = c.a * T2 + target.complex_structure(v, T1) + c.b * speed2[:, None] * vx
    if c.epsilon > 0.0:
        eps_block = spectral_derivative(Avv, 2, length) + spectral_derivative(B, 1, length) + A(v, T2, vx)
        F = F - c.epsilon * eps_block
    return F


def rhs_extrinsic(v, c, target=None, length=None):
    """-eps v_xxxx + F(v) for samples v on the embedded manifold."""
    v_arr, target, length = _unpack(v, target, length)
    F = nonlinearity(v_arr, c, target, length)
    if c.epsilon > 0.0:
        F = F - c.epsilon * spectral_derivative(v_arr, 4, length)
    return F


def rhs_regularized_tube(Q, c, target=None, length=None):
    """Extended field -eps Q_xxxx + F(pi(Q)) for points in the tubular neighbourhood.

    The damping acts on the raw curve, the nonlinearity on its projection.
    Raises :class:`~dispflow.geometry.TubeExceeded` from the projection.
    """
    Q, target, length = _unpack(Q, target, length)
    P = target.project(Q)
    out = nonlinearity(P, c, target, length)
    if c.epsilon > 0.0:
        out = out - c.epsilon * spectral_derivative(Q, 4, length)
    return out


def rhs_intrinsic(u, c):
    """a nabla^2 u_x + J nabla u_x + b g(u_x, u_x) u_x (eps is ignored)."""
    ux = velocity(u)
    w1 = covariant_derivative(u, ux)
    w2 = covariant_derivative(u, w1)
    g = np.einsum("ij,ij->i", ux.vectors, ux.vectors)
    vec = c.a * w2.vectors + u.target.complex_structure(u.points, w1.vectors) + c.b * g[:, None] * ux.vectors
    return TangentSection(u, vec)


def _require_s2(v):
    if isinstance(v, MapState) and v.target.kind is not ManifoldKind.SPHERE2:
        raise ValueError("this model is defined on the unit sphere S^2 only")


def darios_rhs(v, length=None):
    """Vortex filament / Heisenberg chain field v x v_xx on S^2."""
    _require_s2(v)
    v, _, length = _unpack(v, "s2", length if not isinstance(v, MapState) else v.grid.length)
    return np.cross(v, spectral_derivative(v, 2, length))


def fm_rhs(v, a, length=None):
    """Fukumoto-Miyazaki field v x v_xx + a [v_xxx + 3/2 {v_x x (v x v_x)}_x] on S^2."""
    _require_s2(v)
    v, _, length = _unpack(v, "s2", length if not isinstance(v, MapState) else v.grid.length)
    vx, vxx, vxxx = spectral_derivatives(v, (1, 2, 3), length)
    inner = np.cross(vx, np.cross(v, vx))
    return np.cross(v, vxx) + a * (vxxx + 1.5 * spectral_derivative(inner, 1, length))
