"""Pointwise geometry kernels on batches of ambient points.

Every kernel takes ``(n, d)`` arrays (one row per grid point) and returns a new
array.  Each has a numba loop implementation and a numpy implementation; the
module-level names dispatch to one of them according to
:data:`dispflow._accel.USE_NUMBA`.  Both are kept importable under
``NUMPY_KERNELS`` / ``NUMBA_KERNELS`` so they can be cross-checked and
benchmarked against each other.
"""

import numpy as np

from ._accel import HAVE_NUMBA, USE_NUMBA, njit

# Clifford torus: each R^2 factor is a circle of this radius.
TORUS_R = 1.0 / np.sqrt(2.0)

# Imaginary-octonion multiplication e_i e_j = e_k on the Fano plane, 1-based.
FANO_TRIPLES = ((1, 2, 3), (1, 4, 5), (1, 7, 6), (2, 4, 6), (2, 5, 7), (3, 4, 7), (3, 6, 5))


def _structure_constants():
    eps = np.zeros((7, 7, 7))
    for i, j, k in FANO_TRIPLES:
        i, j, k = i - 1, j - 1, k - 1
        for a, b, c in ((i, j, k), (j, k, i), (k, i, j)):
            eps[a, b, c] = 1.0
            eps[b, a, c] = -1.0
    return eps


EPS7 = _structure_constants()
# sparse form (i, j, k, sign) for the loop kernel
_EPS7_SPARSE = np.array(
    [(i, j, k, EPS7[i, j, k]) for i in range(7) for j in range(7) for k in range(7) if EPS7[i, j, k] != 0.0]
)
_E7_I = _EPS7_SPARSE[:, 0].astype(np.int64)
_E7_J = _EPS7_SPARSE[:, 1].astype(np.int64)
_E7_K = _EPS7_SPARSE[:, 2].astype(np.int64)
_E7_S = _EPS7_SPARSE[:, 3].copy()


# ---------------------------------------------------------------- numpy path


def _np_dot_rows(X, Y):
    return np.einsum("ij,ij->i", X, Y)


def _np_sphere_project(Q):
    r = np.sqrt(_np_dot_rows(Q, Q))
    with np.errstate(divide="ignore", invalid="ignore"):
        return Q / r[:, None], np.abs(r - 1.0)


def _np_sphere_tangent(q, X):
    return X - _np_dot_rows(q, X)[:, None] * q


def _np_sphere_sff(q, X, Y):
    return _np_dot_rows(X, Y)[:, None] * q


def _np_cross3(q, X):
    return np.cross(q, X)


def _np_cross7(q, X):
    return np.einsum("ijk,ni,nj->nk", EPS7, q, X, optimize=False)


def _np_torus_project(Q):
    r1 = np.hypot(Q[:, 0], Q[:, 1])
    r2 = np.hypot(Q[:, 2], Q[:, 3])
    P = np.empty_like(Q)
    with np.errstate(divide="ignore", invalid="ignore"):
        P[:, 0:2] = Q[:, 0:2] * (TORUS_R / r1)[:, None]
        P[:, 2:4] = Q[:, 2:4] * (TORUS_R / r2)[:, None]
    return P, np.hypot(r1 - TORUS_R, r2 - TORUS_R)


def _np_torus_tangent(q, X):
    out = X.copy()
    s1 = (q[:, 0] * X[:, 0] + q[:, 1] * X[:, 1]) / TORUS_R**2
    s2 = (q[:, 2] * X[:, 2] + q[:, 3] * X[:, 3]) / TORUS_R**2
    out[:, 0:2] -= s1[:, None] * q[:, 0:2]
    out[:, 2:4] -= s2[:, None] * q[:, 2:4]
    return out


def _np_torus_sff(q, X, Y):
    out = np.empty_like(q)
    out[:, 0:2] = ((X[:, 0] * Y[:, 0] + X[:, 1] * Y[:, 1]) / TORUS_R**2)[:, None] * q[:, 0:2]
    out[:, 2:4] = ((X[:, 2] * Y[:, 2] + X[:, 3] * Y[:, 3]) / TORUS_R**2)[:, None] * q[:, 2:4]
    return out


def _np_torus_J(q, X):
    # unit frame e_theta = (-q2, q1, 0, 0)/r, e_phi = (0, 0, -q4, q3)/r; J e_theta = e_phi
    alpha = (-q[:, 1] * X[:, 0] + q[:, 0] * X[:, 1]) / TORUS_R
    beta = (-q[:, 3] * X[:, 2] + q[:, 2] * X[:, 3]) / TORUS_R
    out = np.empty_like(q)
    out[:, 0] = beta * q[:, 1] / TORUS_R
    out[:, 1] = -beta * q[:, 0] / TORUS_R
    out[:, 2] = -alpha * q[:, 3] / TORUS_R
    out[:, 3] = alpha * q[:, 2] / TORUS_R
    return out


NUMPY_KERNELS = {
    "dot_rows": _np_dot_rows,
    "sphere_project": _np_sphere_project,
    "sphere_tangent": _np_sphere_tangent,
    "sphere_sff": _np_sphere_sff,
    "cross3": _np_cross3,
    "cross7": _np_cross7,
    "torus_project": _np_torus_project,
    "torus_tangent": _np_torus_tangent,
    "torus_sff": _np_torus_sff,
    "torus_J": _np_torus_J,
}


# ---------------------------------------------------------------- numba path


@njit(cache=False)
def _nb_dot_rows(X, Y):
    n, d = X.shape
    out = np.empty(n)
    for i in range(n):
        s = 0.0
        for j in range(d):
            s += X[i, j] * Y[i, j]
        out[i] = s
    return out


@njit(cache=False)
def _nb_sphere_project(Q):
    n, d = Q.shape
    P = np.empty_like(Q)
    dist = np.empty(n)
    for i in range(n):
        s = 0.0
        for j in range(d):
            s += Q[i, j] * Q[i, j]
        r = np.sqrt(s)
        inv = 1.0 / r if r > 0.0 else np.nan
        for j in range(d):
            P[i, j] = Q[i, j] * inv
        dist[i] = abs(r - 1.0)
    return P, dist


@njit(cache=False)
def _nb_sphere_tangent(q, X):
    n, d = q.shape
    out = np.empty_like(X)
    for i in range(n):
        s = 0.0
        for j in range(d):
            s += q[i, j] * X[i, j]
        for j in range(d):
            out[i, j] = X[i, j] - s * q[i, j]
    return out


@njit(cache=False)
def _nb_sphere_sff(q, X, Y):
    n, d = q.shape
    out = np.empty_like(q)
    for i in range(n):
        s = 0.0
        for j in range(d):
            s += X[i, j] * Y[i, j]
        for j in range(d):
            out[i, j] = s * q[i, j]
    return out


@njit(cache=False)
def _nb_cross3(q, X):
    n = q.shape[0]
    out = np.empty_like(X)
    for i in range(n):
        out[i, 0] = q[i, 1] * X[i, 2] - q[i, 2] * X[i, 1]
        out[i, 1] = q[i, 2] * X[i, 0] - q[i, 0] * X[i, 2]
        out[i, 2] = q[i, 0] * X[i, 1] - q[i, 1] * X[i, 0]
    return out


@njit(cache=False)
def _nb_cross7_impl(q, X, ei, ej, ek, es):
    n = q.shape[0]
    out = np.zeros_like(X)
    for i in range(n):
        for t in range(ei.shape[0]):
            out[i, ek[t]] += es[t] * q[i, ei[t]] * X[i, ej[t]]
    return out


def _nb_cross7(q, X):
    return _nb_cross7_impl(q, X, _E7_I, _E7_J, _E7_K, _E7_S)


@njit(cache=False)
def _nb_torus_project(Q):
    n = Q.shape[0]
    R = 1.0 / np.sqrt(2.0)
    P = np.empty_like(Q)
    dist = np.empty(n)
    for i in range(n):
        r1 = np.sqrt(Q[i, 0] ** 2 + Q[i, 1] ** 2)
        r2 = np.sqrt(Q[i, 2] ** 2 + Q[i, 3] ** 2)
        s1 = R / r1 if r1 > 0.0 else np.nan
        s2 = R / r2 if r2 > 0.0 else np.nan
        P[i, 0] = Q[i, 0] * s1
        P[i, 1] = Q[i, 1] * s1
        P[i, 2] = Q[i, 2] * s2
        P[i, 3] = Q[i, 3] * s2
        dist[i] = np.sqrt((r1 - R) ** 2 + (r2 - R) ** 2)
    return P, dist


@njit(cache=False)
def _nb_torus_tangent(q, X):
    n = q.shape[0]
    out = np.empty_like(X)
    for i in range(n):
        s1 = 2.0 * (q[i, 0] * X[i, 0] + q[i, 1] * X[i, 1])
        s2 = 2.0 * (q[i, 2] * X[i, 2] + q[i, 3] * X[i, 3])
        out[i, 0] = X[i, 0] - s1 * q[i, 0]
        out[i, 1] = X[i, 1] - s1 * q[i, 1]
        out[i, 2] = X[i, 2] - s2 * q[i, 2]
        out[i, 3] = X[i, 3] - s2 * q[i, 3]
    return out


@njit(cache=False)
def _nb_torus_sff(q, X, Y):
    n = q.shape[0]
    out = np.empty_like(q)
    for i in range(n):
        s1 = 2.0 * (X[i, 0] * Y[i, 0] + X[i, 1] * Y[i, 1])
        s2 = 2.0 * (X[i, 2] * Y[i, 2] + X[i, 3] * Y[i, 3])
        out[i, 0] = s1 * q[i, 0]
        out[i, 1] = s1 * q[i, 1]
        out[i, 2] = s2 * q[i, 2]
        out[i, 3] = s2 * q[i, 3]
    return out


@njit(cache=False)
def _nb_torus_J(q, X):
    n = q.shape[0]
    out = np.empty_like(q)
    for i in range(n):
        # 1/r^2 = 2
        alpha = 2.0 * (-q[i, 1] * X[i, 0] + q[i, 0] * X[i, 1])
        beta = 2.0 * (-q[i, 3] * X[i, 2] + q[i, 2] * X[i, 3])
        out[i, 0] = beta * q[i, 1]
        out[i, 1] = -beta * q[i, 0]
        out[i, 2] = -alpha * q[i, 3]
        out[i, 3] = alpha * q[i, 2]
    return out


NUMBA_KERNELS = {
    "dot_rows": _nb_dot_rows,
    "sphere_project": _nb_sphere_project,
    "sphere_tangent": _nb_sphere_tangent,
    "sphere_sff": _nb_sphere_sff,
    "cross3": _nb_cross3,
    "cross7": _nb_cross7,
    "torus_project": _nb_torus_project,
    "torus_tangent": _nb_torus_tangent,
    "torus_sff": _nb_torus_sff,
    "torus_J": _nb_torus_J,
}

if not HAVE_NUMBA:
    NUMBA_KERNELS = {}

_ACTIVE = NUMBA_KERNELS if USE_NUMBA else NUMPY_KERNELS

dot_rows = _ACTIVE["dot_rows"]
sphere_project = _ACTIVE["sphere_project"]
sphere_tangent = _ACTIVE["sphere_tangent"]
sphere_sff = _ACTIVE["sphere_sff"]
cross3 = _ACTIVE["cross3"]
cross7 = _ACTIVE["cross7"]
torus_project = _ACTIVE["torus_project"]
torus_tangent = _ACTIVE["torus_tangent"]
torus_sff = _ACTIVE["torus_sff"]
torus_J = _ACTIVE["torus_J"]
