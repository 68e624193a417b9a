"""Numerical verification of the structural hypotheses behind the main
existence and variational-principle results: transversality of the impulsive
set and of its image to the flow direction, separation between the two, and
continuity of the first-hitting time at the impulsive set.

These are sampled checks of open conditions, not proofs; every report carries
the worst witness so a failure is reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .flow_core import (
    IntegratorConfig,
    RegionEscape,
    eval_vector_field,
    flow,
    level_gradient,
)
from .impulsive_system import SystemSpec, first_hitting_time
from .systems import _pieces, _sample_piece, sample_impulsive_set

__all__ = [
    "TransversalityReport",
    "SeparationReport",
    "transversality_margin",
    "separation_report",
    "hitting_continuity_probe",
]


@dataclass(frozen=True)
class TransversalityReport:
    which: str
    sampled_points: int
    min_abs_inner: float
    sign_consistent: bool
    common_sign: int
    worst_point: np.ndarray
    margin_tol: float

    @property
    def passed(self) -> bool:
        return self.sign_consistent and self.min_abs_inner > self.margin_tol


@dataclass(frozen=True)
class SeparationReport:
    dist_D_ID: float
    xi_margin: float
    n_samples: int
    clear_tol: float


def transversality_margin(sys: SystemSpec, which: str, n_samples: int,
                          margin_tol: float = 1e-6) -> TransversalityReport:
    """Sampled transversality check of the impulsive set (which='D') or of its
    image (which='ID').

    Quasi-uniform samples of each piece are scored by the inner product of the
    piece's level gradient with the vector field.  The check passes when every
    inner product shares one sign and the smallest magnitude clears
    margin_tol.
    """
    if n_samples < 1:
        raise ValueError("need at least one sample")
    pieces = _pieces(sys, which)
    per = [n_samples // len(pieces)] * len(pieces)
    per[0] += n_samples - sum(per)
    inners, points = [], []
    for piece, m in zip(pieces, per):
        if m == 0:
            continue
        single = _sample_piece(sys, piece, m)
        grads = level_gradient(piece.level_id, single)
        f = eval_vector_field(sys.field, single)
        inners.append(np.einsum("nd,nd->n", grads, f))
        points.append(single)
    inner = np.concatenate(inners)
    pts = np.vstack(points)
    if len(inner) == 0:
        raise ValueError("sampling produced no points; constraints unsatisfiable")
    worst = int(np.argmin(np.abs(inner)))
    signs = np.sign(inner)
    consistent = bool((signs == signs[0]).all() and signs[0] != 0)
    return TransversalityReport(
        which=which,
        sampled_points=len(inner),
        min_abs_inner=float(np.abs(inner[worst])),
        sign_consistent=consistent,
        common_sign=int(signs[0]) if consistent else 0,
        worst_point=pts[worst].copy(),
        margin_tol=margin_tol,
    )


def separation_report(sys: SystemSpec, n_samples: int,
                      xi_cap: float = 2 * np.pi,
                      clear_tol: float = 1e-3,
                      cfg: IntegratorConfig | None = None) -> SeparationReport:
    """Distance between the impulsive set and its image, plus the largest
    probed xi for which the forward tube of the impulsive set of width xi
    stays clear of the image.

    Both sets are sampled quasi-uniformly; the tube is the forward flow of the
    impulsive-set samples, traced on a fine time grid up to xi_cap, and the
    margin is found by binary search on the monotone clearance predicate.
    """
    cfg = cfg or IntegratorConfig()
    d_samples = sample_impulsive_set(sys, "D", n_samples)
    id_samples = sample_impulsive_set(sys, "ID", n_samples)
    dist = _min_cross_distance(d_samples, id_samples)

    n_slices = 512
    ts = xi_cap * np.arange(1, n_slices + 1) / n_slices
    # forward tube of a subset of the D samples (pure flow, no impulses)
    probes = d_samples[:: max(1, len(d_samples) // 128)]
    clearance = np.empty(n_slices)
    states = probes.copy()
    prev_t = 0.0
    for k, tk in enumerate(ts):
        states = flow(sys.field, states, tk - prev_t, cfg)
        prev_t = tk
        clearance[k] = _min_cross_distance(states, id_samples)
    blocked = np.minimum.accumulate(clearance) <= clear_tol
    if blocked.any():
        first = int(np.searchsorted(blocked, True))
        xi_margin = float(ts[first - 1]) if first > 0 else 0.0
    else:
        xi_margin = float(xi_cap)
    return SeparationReport(
        dist_D_ID=float(dist),
        xi_margin=xi_margin,
        n_samples=n_samples,
        clear_tol=clear_tol,
    )


def _min_cross_distance(a: np.ndarray, b: np.ndarray) -> float:
    d2 = np.sum((a[:, None, :] - b[None, :, :]) ** 2, axis=2)
    return float(np.sqrt(d2.min()))


def hitting_continuity_probe(sys: SystemSpec, x_in_d: np.ndarray,
                             approach_dirs: int, scales,
                             xi: float = 0.25,
                             cfg: IntegratorConfig | None = None) -> list[dict]:
    """Decay of the first-hitting time along incoming approaches to a point of
    the impulsive set.

    For each scale s, probe points are produced by sliding x inside the set
    along approach_dirs tangent directions and flowing backward for time s;
    their first-hitting time is then measured forward (0 on the set itself).
    Probes that fall outside the impulsive set's backward-reachable complement
    within xi are counted as escaped, not fatal.

    Returns one row per scale: {"scale", "tau_star_max", "escaped"}.
    """
    cfg = cfg or IntegratorConfig()
    x = np.asarray(x_in_d, dtype=float)
    j = sys.in_impulsive_set(x, tol=1e-7)
    if j < 0:
        raise ValueError("base point is not on the impulsive set")
    piece = sys.impulsive_sets[j]
    scales = np.asarray(list(scales), dtype=float)
    if (scales <= 0).any() or (np.diff(scales) >= 0).any():
        raise ValueError("scales must be positive and decreasing")
    dirs = _tangent_directions(piece.level_id, x, approach_dirs)

    rows = []
    for s in scales:
        taus = []
        escaped = 0
        for d in dirs:
            p = x + 0.5 * s * d
            if not piece.contains(p, tol=1e-6):
                p = x  # sliding left the set; fall back to the base point
            xk = flow(sys.field, p, -s, cfg)
            if sys.in_impulsive_set(xk, tol=1e-9) >= 0:
                taus.append(0.0)
                continue
            if _in_forward_tube(sys, xk, xi, cfg):
                escaped += 1
                continue
            hit = first_hitting_time(sys, xk, t_max=max(10.0, 4 * s), cfg=cfg)
            if hit is None:
                escaped += 1
            else:
                taus.append(hit[0])
        rows.append({
            "scale": float(s),
            "tau_star_max": float(max(taus)) if taus else float("nan"),
            "escaped": escaped,
        })
    return rows


def _tangent_directions(level_id: str, x: np.ndarray, m: int) -> np.ndarray:
    g = level_gradient(level_id, x)
    g = g / np.linalg.norm(g)
    dim = len(x)
    if dim == 2:
        t = np.array([-g[1], g[0]])
        dirs = np.vstack([t, -t])
        return dirs[: max(1, min(m, 2))]
    # orthonormal basis of the tangent plane
    a = np.eye(dim)[int(np.argmin(np.abs(g)))]
    u = a - np.dot(a, g) * g
    u /= np.linalg.norm(u)
    v = np.cross(g, u) if dim == 3 else None
    angles = 2 * np.pi * np.arange(m) / max(m, 1)
    return np.cos(angles)[:, None] * u + np.sin(angles)[:, None] * v


def _in_forward_tube(sys: SystemSpec, x: np.ndarray, xi: float,
                     cfg: IntegratorConfig) -> bool:
    """Whether x lies on a forward flow segment of length < xi emanating from
    the impulsive set: probed by reversed-time hit detection."""
    try:
        hit = first_hitting_time(sys, x, t_max=xi, cfg=cfg,
                                 reverse=True, check_region=False)
    except RegionEscape:
        return False
    return hit is not None and hit[0] < xi
