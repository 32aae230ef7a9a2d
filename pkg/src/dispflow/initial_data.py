"""Analytic initial-data families.

Perturbations are built in the ambient space and then projected, except for
the families that are constructed on the manifold directly (constant,
great-circle, torus-winding, s6-circle, random-analytic).
"""

import numpy as np

from .fields import MapState
from .geometry import ManifoldKind, get_target


class BadParameters(ValueError):
    pass


FAMILY_PARAMS = {
    "constant": {"point"},
    "great-circle": {"k"},
    "perturbed-circle": {"k", "amp", "mode"},
    "bump": {"center", "width", "height"},
    "torus-winding": {"k1", "k2", "amp", "mode"},
    "s6-circle": {"plane", "k"},
    "random-analytic": {"seed", "modes", "factors", "amp"},
}


def _base_point(target):
    p = np.zeros(target.ambient_dim)
    if target.kind is ManifoldKind.CLIFFORD_TORUS2:
        p[0] = p[2] = 1.0 / np.sqrt(2.0)
    else:
        p[-1] = 1.0
    return p


def _project_checked(Q, target):
    dist = target.distance(Q)
    if np.max(dist) >= target.tube_radius:
        raise BadParameters(
            f"pre-projection curve reaches distance {np.max(dist):.3g} from the manifold "
            f"(tube radius {target.tube_radius:.3g})"
        )
    return target.project(Q)


def _sphere_circle(x, L, k, dim, i=0, j=1):
    pts = np.zeros((x.size, dim))
    pts[:, i] = np.cos(2 * np.pi * k * x / L)
    pts[:, j] = np.sin(2 * np.pi * k * x / L)
    return pts


def make_initial_data(family, params, grid, target):
    """Build an analytic on-manifold :class:`MapState` at t = 0."""
    target = get_target(target)
    params = dict(params or {})
    allowed = FAMILY_PARAMS.get(family)
    if allowed is None:
        raise BadParameters(f"unknown initial-data family {family!r}; expected one of {sorted(FAMILY_PARAMS)}")
    extra = set(params) - allowed
    if extra:
        raise BadParameters(f"family {family!r} does not take parameters {sorted(extra)}")
    x, L, d = grid.x, grid.length, target.ambient_dim
    sphere = target.kind in (ManifoldKind.SPHERE2, ManifoldKind.SPHERE6)

    if family == "constant":
        p = np.asarray(params.get("point", _base_point(target)), dtype=float)
        if p.shape != (d,):
            raise BadParameters(f"point must have {d} components")
        if target.distance(p) > 1e-12:
            raise BadParameters("constant point must lie on the manifold")
        pts = np.tile(p, (grid.n, 1))

    elif family in ("great-circle", "perturbed-circle"):
        if not sphere:
            raise BadParameters(f"{family} is defined on the sphere targets")
        k = int(params.get("k", 1))
        pts = _sphere_circle(x, L, k, d)
        if family == "perturbed-circle":
            amp = float(params.get("amp", 0.05))
            mode = int(params.get("mode", 3))
            pts[:, 2] += amp * np.sin(2 * np.pi * mode * x / L)
            pts = _project_checked(pts, target)

    elif family == "s6-circle":
        if target.kind is not ManifoldKind.SPHERE6:
            raise BadParameters("s6-circle requires the s6 target")
        i, j = params.get("plane", (0, 1))
        if not (0 <= i < 7 and 0 <= j < 7 and i != j):
            raise BadParameters("plane must be two distinct axis indices in 0..6")
        pts = _sphere_circle(x, L, int(params.get("k", 1)), d, int(i), int(j))

    elif family == "torus-winding":
        if target.kind is not ManifoldKind.CLIFFORD_TORUS2:
            raise BadParameters("torus-winding requires the t2-clifford target")
        k1, k2 = int(params.get("k1", 1)), int(params.get("k2", 1))
        amp, mode = float(params.get("amp", 0.0)), int(params.get("mode", 1))
        th = 2 * np.pi * k1 * x / L
        ph = 2 * np.pi * k2 * x / L + amp * np.sin(2 * np.pi * mode * x / L)
        pts = np.stack([np.cos(th), np.sin(th), np.cos(ph), np.sin(ph)], axis=1) / np.sqrt(2.0)

    elif family == "bump":
        center = float(params.get("center", L / 2))
        width = float(params.get("width", L / 10))
        height = float(params.get("height", 0.3))
        if width <= 0:
            raise BadParameters("bump width must be positive")
        dxp = (x - center + L / 2) % L - L / 2
        prof = height * np.exp(-((dxp / width) ** 2))
        base = _base_point(target)
        pts = np.tile(base, (grid.n, 1))
        direction = np.zeros(d)
        direction[0 if sphere else 1] = 1.0
        pts = pts + prof[:, None] * direction
        pts = _project_checked(pts, target)

    elif family == "random-analytic":
        pts = random_analytic_curve(
            grid,
            target,
            seed=int(params.get("seed", 0)),
            modes=int(params.get("modes", 2)),
            factors=int(params.get("factors", 2)),
            amp=float(params.get("amp", 0.3)),
        )

    return MapState(grid, 0.0, pts, target)


def _rotation_factor(pts, x, L, Q, freqs):
    """Apply exp(x A) with A = Q blockdiag(2 pi f_b / L J2) Q^T to each row."""
    y = pts @ Q
    out = y.copy()
    for b, f in enumerate(freqs):
        c, s = np.cos(2 * np.pi * f * x / L), np.sin(2 * np.pi * f * x / L)
        i, j = 2 * b, 2 * b + 1
        out[:, i] = c * y[:, i] - s * y[:, j]
        out[:, j] = s * y[:, i] + c * y[:, j]
    return out @ Q.T


def random_analytic_curve(grid, target, seed=0, modes=2, factors=2, amp=0.3):
    """Generic band-limited curve lying exactly on the target.

    Spheres: u(x) = R_1(x) ... R_f(x) p where each R_i is a one-parameter
    rotation subgroup with integer frequencies <= ``modes`` in a random
    orthonormal frame, so every coordinate is a trigonometric polynomial and
    the speed is not constant.  Torus: both angles carry a unit winding plus a
    random trigonometric polynomial of degree ``modes`` scaled by ``amp``.
    """
    target = get_target(target)
    rng = np.random.default_rng(seed)
    x, L = grid.x, grid.length
    if target.kind is ManifoldKind.CLIFFORD_TORUS2:
        ks = np.arange(1, modes + 1)
        phase = 2 * np.pi * np.outer(x, ks) / L
        basis = np.concatenate([np.cos(phase), np.sin(phase)], axis=1)
        ang = basis @ (rng.normal(size=(2 * modes, 2)) * amp)
        th = 2 * np.pi * x / L + ang[:, 0]
        ph = 2 * np.pi * x / L + ang[:, 1]
        return np.stack([np.cos(th), np.sin(th), np.cos(ph), np.sin(ph)], axis=1) / np.sqrt(2.0)
    d = target.ambient_dim
    p = rng.normal(size=d)
    pts = np.tile(p / np.linalg.norm(p), (grid.n, 1))
    for _ in range(factors):
        Q, _ = np.linalg.qr(rng.normal(size=(d, d)))
        freqs = rng.integers(1, modes + 1, size=d // 2)
        pts = _rotation_factor(pts, x, L, Q, freqs)
    # rotations are isometries; renormalise only the accumulated round-off
    return pts / np.linalg.norm(pts, axis=1)[:, None]
