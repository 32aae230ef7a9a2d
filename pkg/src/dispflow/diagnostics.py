"""Gauge energies, conserved quantities and identity self-tests.

The gauge factor on the periodic grid is anchored at the left endpoint,
K(0) = 0, instead of at -infinity.  K is then not periodic (it drops by
||u_x||^2 / (3a) over one period), so gauged sections are never wrapped: the
appendix check writes K = kappa x + K_per with K_per periodic and handles the
linear part analytically.
"""

import csv
import io
import json
from dataclasses import asdict, dataclass

import numpy as np

from .fields import (
    NOISE_FLOOR,
    TangentSection,
    covariant_derivative,
    iterated_covariant,
    l2_inner,
    l2_norm_sq,
    nabla_J,
    rect_integral,
    sobolev_profile,
    spectral_derivative,
)
from .geometry import ManifoldKind


class WrongTarget(ValueError):
    pass


def _speed2(u):
    ux = iterated_covariant(u, 0)[0].vectors
    return np.einsum("ij,ij->i", ux, ux)


def gauge_factor(u, a, method="rectangle"):
    """K(x_j) = -(1/(3a)) int_0^{x_j} g(u_x, u_x) dy.

    ``rectangle`` is the left-endpoint cumulative sum (K(0) = 0 exactly, and
    |K| <= ||u_x||^2_{L^2}/(3|a|) holds discretely).  ``spectral`` integrates
    the trigonometric interpolant of g(u_x, u_x) exactly; it is what the
    appendix identities need, since its x-derivative is exactly -g/(3a).
    """
    if a == 0:
        raise ValueError("the gauge factor needs a != 0")
    g = _speed2(u)
    dx, L, n = u.grid.dx, u.grid.length, u.grid.n
    if method == "rectangle":
        cum = np.concatenate(([0.0], np.cumsum(g[:-1]) * dx))
        return -cum / (3.0 * a)
    if method == "spectral":
        kappa, per = _spectral_gauge_parts(g, a, L)
        return kappa * u.grid.x + per
    raise ValueError(f"unknown gauge method {method!r}")


def _spectral_gauge_parts(g, a, L):
    """Split the spectral gauge into slope * x + periodic part with K(0) = 0."""
    n = g.size
    gh = np.fft.rfft(g)
    k = 2.0 * np.pi * np.fft.rfftfreq(n, d=L / n)
    mean = gh[0].real / n
    ih = np.zeros_like(gh)
    ih[1:] = gh[1:] / (1j * k[1:])
    ih[-1] = 0.0
    per = np.fft.irfft(ih, n=n)
    per -= per[0]
    return -mean / (3.0 * a), -per / (3.0 * a)


def gauge_bound(u, a):
    K = gauge_factor(u, a)
    return float(np.max(np.exp(np.abs(K))))


def gauge_ceiling(l2_initial, a):
    """1 + exp(||u_0x||^2 / (3|a|))."""
    return 1.0 + float(np.exp(l2_initial / (3.0 * abs(a))))


def norm_equivalence_holds(rec, m, ceiling):
    """C^-1 ||u_x||_{H^m} <= N_m <= C ||u_x||_{H^m} with C the gauge ceiling.

    Follows from e^{-|K|} <= e^{+-K} <= e^{|K|} applied to the top term only.
    """
    if rec.gauge_energy_Nm is None:
        return True
    hm = np.sqrt(rec.sobolev[m])
    nm = rec.gauge_energy_Nm
    slack = 1.0 + 1e-12
    return bool(nm <= ceiling * hm * slack and hm <= ceiling * nm * slack)


def gauged_section(u, m, a):
    """V^(m) = e^K nabla^m u_x."""
    W = iterated_covariant(u, m)[m]
    return W.scaled(np.exp(gauge_factor(u, a)))


def gauge_energy(u, m, a):
    """N_m = (||u_x||^2_{H^{m-1}} + ||V^(m)||^2_{L^2})^(1/2)."""
    if m < 1:
        raise ValueError("gauge energy needs m >= 1")
    Ws = iterated_covariant(u, m)
    low = sum(l2_norm_sq(W) for W in Ws[:m])
    V = Ws[m].scaled(np.exp(gauge_factor(u, a)))
    return float(np.sqrt(low + l2_norm_sq(V)))


def conserved_energy(u, K_curv=None):
    """Fourth-order energy conserved on constant-curvature surfaces when b = aK/2."""
    if u.target.kind is ManifoldKind.SPHERE6:
        raise WrongTarget("the conserved energy E is defined only for constant-curvature surface targets")
    K = u.target.gauss_curvature if K_curv is None else K_curv
    U, W1, W2 = (W.vectors for W in iterated_covariant(u, 2))
    gUU = np.einsum("ij,ij->i", U, U)
    gUW = np.einsum("ij,ij->i", U, W1)
    gWW = np.einsum("ij,ij->i", W1, W1)
    dx = u.grid.dx
    return (
        rect_integral(np.einsum("ij,ij->i", W2, W2), dx)
        + K**2 / 8.0 * rect_integral(gUU**3, dx)
        - K * rect_integral(gUW**2, dx)
        - 1.5 * K * rect_integral(gUU * gWW, dx)
    )


def dissipation_residual(before, after, c, dt):
    """Relative mismatch of d/dt ||u_x||^2 = -2 eps ||nabla^2 u_x||^2 over one step.

    The right side is averaged over the two endpoints (midpoint value to
    O(dt^2)).  For eps = 0 the identity is conservation and the return value is
    |d/dt ||u_x||^2| / ||u_x||^2.
    """
    pb, pa = sobolev_profile(before, 2), sobolev_profile(after, 2)
    rate = (pa[0] - pb[0]) / dt
    if c.epsilon == 0.0:
        return abs(rate) / max(0.5 * (pa[0] + pb[0]), 1e-300)
    w2 = 0.5 * ((pb[2] - pb[1]) + (pa[2] - pa[1]))
    floor = 1e-12 * 0.5 * (pa[2] + pb[2])
    return abs(rate + 2.0 * c.epsilon * w2) / (2.0 * c.epsilon * w2 + floor + 1e-300)


# --------------------------------------------------------- appendix identities


def appendix_commutator_check(u, m, a, chop=NOISE_FLOOR):
    """Largest relative residual of the four commutator identities

        e^K nabla^{m+k} u_x = (nabla - K_x)^k V^(m),  k = 1..4,

    written out with K_x, K_xx, K_xxx, K_xxxx.  The left side gauges the
    iterated covariant derivative; the right side covariantly differentiates
    the gauged section and combines it with spectral derivatives of
    K_x = -g(u_x, u_x)/(3a).

    Up to eight successive spectral derivatives are involved, so the noise
    filter of :mod:`dispflow.fields` matters here; ``chop=None`` disables it.
    """
    if m < 1:
        raise ValueError("appendix identities need m >= 1")
    if a == 0:
        raise ValueError("appendix identities need a != 0")
    Ws = iterated_covariant(u, m + 4, chop)
    scale = max(float(np.max(np.abs(W.vectors))) for W in Ws[m:])
    if scale == 0.0:
        return 0.0
    g = np.einsum("ij,ij->i", Ws[0].vectors, Ws[0].vectors)
    kappa, per = _spectral_gauge_parts(g, a, u.grid.length)
    lin = np.exp(kappa * u.grid.x)[:, None]
    # periodic factor P = e^{K_per} nabla^m u_x; nabla (e^{kappa x} P) = e^{kappa x} T(kappa P + P_x)
    P = np.exp(per)[:, None] * Ws[m].vectors
    DV = [P]
    for _ in range(4):
        d = kappa * DV[-1] + spectral_derivative(DV[-1], 1, u.grid.length, chop=chop)
        DV.append(u.target.tangent_project(u.points, d))
    V0, V1, V2, V3, V4 = (lin * D for D in DV)
    Kx = -g / (3.0 * a)
    Kxx, Kxxx, Kxxxx = (spectral_derivative(Kx, j, u.grid.length, chop=chop) for j in (1, 2, 3))
    Kx, Kxx, Kxxx, Kxxxx = (k[:, None] for k in (Kx, Kxx, Kxxx, Kxxxx))
    c2 = Kxx - Kx**2
    c3 = Kxxx - 3 * Kx * Kxx + Kx**3
    c4 = Kxxxx - 4 * Kx * Kxxx - 3 * Kxx**2 + 6 * Kx**2 * Kxx - Kx**4
    rhs = [
        V1 - Kx * V0,
        V2 - 2 * Kx * V1 - c2 * V0,
        V3 - 3 * Kx * V2 - 3 * c2 * V1 - c3 * V0,
        V4 - 4 * Kx * V3 - 6 * c2 * V2 - 4 * c3 * V1 - c4 * V0,
    ]
    eK = (lin[:, 0] * np.exp(per))[:, None]
    worst = 0.0
    for k in range(1, 5):
        lhs = eK * Ws[m + k].vectors
        denom = max(float(np.max(np.abs(lhs))), 1e-300)
        worst = max(worst, float(np.max(np.abs(lhs - rhs[k - 1]))) / denom)
    return worst


def nabla_J_energy_pairing_check(u, V):
    """|int g((nabla_x J)V, V)| / ||V||^2 (zero by anti-symmetry)."""
    nv = l2_norm_sq(V)
    if nv == 0.0:
        return 0.0
    return abs(l2_inner(nabla_J(u, V), V)) / nv


def nabla_J_symmetrized_pairing(u, V, W):
    """|int g((nabla_x J)V, W) + int g(V, (nabla_x J)W)| / (||V|| ||W||)."""
    nv, nw = l2_norm_sq(V), l2_norm_sq(W)
    if nv == 0.0 or nw == 0.0:
        return 0.0
    s = l2_inner(nabla_J(u, V), W) + l2_inner(V, nabla_J(u, W))
    return abs(s) / np.sqrt(nv * nw)


def metric_compatibility_residual(u, V, W):
    """max |d/dx g(V, W) - g(nabla V, W) - g(V, nabla W)|."""
    gVW = np.einsum("ij,ij->i", V.vectors, W.vectors)
    lhs = spectral_derivative(gVW, 1, u.grid.length)
    dV, dW = covariant_derivative(u, V).vectors, covariant_derivative(u, W).vectors
    rhs = np.einsum("ij,ij->i", dV, W.vectors) + np.einsum("ij,ij->i", V.vectors, dW)
    return float(np.max(np.abs(lhs - rhs)))


# -------------------------------------------------------------------- records


@dataclass
class DiagnosticsRecord:
    t: float
    l2_energy: float
    sobolev: list
    gauge_energy_Nm: float | None
    conserved_E: float | None
    constraint_violation: float
    dissipation_residual: float | None
    gauge_bound: float | None


def record(u, c, m, prev=None, dt=None):
    """Sample every tracked quantity at the snapshot ``u``.

    ``prev`` and ``dt`` (the state one step earlier and the step size) enable
    the dissipation residual.
    """
    Ws = iterated_covariant(u, m)
    norms = [l2_norm_sq(W) for W in Ws]
    prof = np.cumsum(norms)
    Nm = gb = None
    if c.a != 0.0:
        K = gauge_factor(u, c.a)
        V = Ws[m].scaled(np.exp(K))
        Nm = float(np.sqrt((prof[m - 1] if m >= 1 else 0.0) + l2_norm_sq(V)))
        gb = float(np.max(np.exp(np.abs(K))))
    E = None
    if u.target.kind is not ManifoldKind.SPHERE6:
        E = float(conserved_energy(u))
    res = None
    if prev is not None and dt:
        res = float(dissipation_residual(prev, u, c, dt))
    return DiagnosticsRecord(
        t=float(u.time),
        l2_energy=float(prof[0]),
        sobolev=[float(s) for s in prof],
        gauge_energy_Nm=Nm,
        conserved_E=E,
        constraint_violation=u.constraint_violation,
        dissipation_residual=res,
        gauge_bound=gb,
    )


def csv_header(m):
    return ["t", "l2"] + [f"h{j}" for j in range(1, m + 1)] + ["N_m", "E", "constraint", "dissipation_residual", "gauge_bound"]


def _fmt(v):
    return "" if v is None else repr(float(v))


def records_to_csv(records, m):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(csv_header(m))
    for r in records:
        w.writerow(
            [_fmt(r.t)]
            + [_fmt(s) for s in r.sobolev[: m + 1]]
            + [_fmt(r.gauge_energy_Nm), _fmt(r.conserved_E), _fmt(r.constraint_violation),
               _fmt(r.dissipation_residual), _fmt(r.gauge_bound)]
        )
    return buf.getvalue()


def relative_drift(values):
    vals = np.asarray([v for v in values if v is not None], dtype=float)
    if vals.size == 0:
        return None
    ref = abs(vals[0])
    return float(np.max(np.abs(vals - vals[0])) / (ref if ref > 0 else 1.0))


def summarize(traj):
    recs = traj.diagnostics
    return {
        "termination": traj.termination.kind,
        "t_final": float(traj.snapshots[-1].time) if traj.snapshots else 0.0,
        "max_constraint": max((r.constraint_violation for r in recs), default=0.0),
        "max_drift_l2": relative_drift([r.l2_energy for r in recs]),
        "max_drift_E": relative_drift([r.conserved_E for r in recs]),
        "doubling_time_N4": traj.doubling_time_N4,
    }


def summary_json(summary):
    return json.dumps(summary, indent=2)


def record_to_dict(r):
    return asdict(r)
