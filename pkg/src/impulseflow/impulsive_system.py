"""Impulsive semiflows: detect hits of the impulsive set, apply the impulse
map, and realize the hit-time recursion.

The propagation engine advances a whole batch of independent initial states
with one shared adaptive step, locating level-set crossings per member by
bisection on the integrator's dense output.  Trajectories are right-continuous
across impulses: the value at a hit time is the post-impulse state.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .flow_core import (
    _RK_P,
    BatchStepper,
    IntegratorConfig,
    RegionEscape,
    VectorFieldSpec,
    dense_eval,
    eval_vector_field,
    level_value,
    make_rhs,
    system_dimension,
)

__all__ = [
    "ImpulsiveSetSpec",
    "ImpulseMapSpec",
    "SystemSpec",
    "ImpulsiveTrajectory",
    "AmbiguousCrossing",
    "GapUnderflow",
    "first_hitting_time",
    "apply_impulse",
    "impulse_preimages",
    "impulsive_trajectory",
    "impulsive_trajectory_batch",
    "psi",
    "psi_batch",
    "write_trajectory_csv",
    "write_impulses_csv",
]

_TIME_TOL = 1e-12          # bisection tolerance for hit times
_HORIZON_SLACK = 1e-9      # hits this close past a horizon still count (right continuity)
_COINCIDE_TOL = 1e-9       # sample time equals a hit time within this -> post state
_DEFAULT_MIN_GAP = 1e-9


class AmbiguousCrossing(RuntimeError):
    """Two level crossings inside one integration step; max_step is too large."""


class GapUnderflow(RuntimeError):
    """Consecutive hit times closer than the minimum gap; the configuration is
    degenerate (numerically the impulse image touches the impulsive set)."""


# --------------------------------------------------------------------------
# Specs
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ImpulsiveSetSpec:
    """A constrained codimension-one piece of a level set {L = c}.

    halfspaces: tuple of (normal, offset) pairs; a state x belongs to the set
    only if normal . x >= offset for each pair.  direction restricts the sign
    of dL/dt at a crossing: +1 means L increases through c, -1 decreases,
    0 accepts both.
    """

    level_id: str
    level_value: float
    halfspaces: tuple = ()
    direction: int = 0
    membership_tol: float = 1e-9

    def constraint_mask(self, x: np.ndarray, slack: float = 1e-9) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        ok = np.ones(len(x), dtype=bool)
        for normal, offset in self.halfspaces:
            ok &= x @ np.asarray(normal, dtype=float) >= offset - slack
        return ok

    def contains(self, x: np.ndarray, tol: float | None = None) -> np.ndarray:
        """Membership test: on the level within tolerance and inside every
        halfspace."""
        tol = self.membership_tol if tol is None else tol
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        xs = np.atleast_2d(x)
        near = np.abs(level_value(self.level_id, xs) - self.level_value) <= tol
        ok = near & self.constraint_mask(xs, slack=tol)
        return bool(ok[0]) if single else ok


@dataclass(frozen=True)
class ImpulseMapSpec:
    """A builtin impulse map, selected by id."""

    map_id: str
    params: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        if self.map_id not in _IMPULSE_MAPS:
            raise ValueError(f"unknown map_id {self.map_id!r}")
        object.__setattr__(self, "params", dict(self.params))


def _imp_annulus_fold(params, x, set_idx):
    # (x, 0) -> (-1/2 - x/2, 0): folds the right segment onto the left one
    out = np.empty_like(x)
    out[:, 0] = -0.5 - 0.5 * x[:, 0]
    out[:, 1] = 0.0
    return out


def _inv_annulus_fold(params, p):
    x0 = -2.0 * p[0] - 1.0
    return [np.array([x0, 0.0])]


def _imp_plane_rescale(params, x, set_idx):
    xi = np.asarray(params["xi"], dtype=float)
    eta = np.asarray(params["eta"], dtype=float)
    scale = eta[set_idx] / xi[set_idx]
    return x * scale[:, None]


def _inv_plane_rescale(params, p):
    xi = np.asarray(params["xi"], dtype=float)
    eta = np.asarray(params["eta"], dtype=float)
    s = float(p.sum())
    out = []
    for i in range(len(xi)):
        if abs(s - eta[i]) <= 1e-7 * max(1.0, eta[i]):
            out.append(p * (xi[i] / eta[i]))
    return out


def _imp_angle_double(params, x, set_idx):
    # cylinder point (cos a, sin a, 1) -> (cos 2a, sin 2a, 0)
    ang = np.arctan2(x[:, 1], x[:, 0])
    out = np.empty_like(x)
    out[:, 0] = np.cos(2.0 * ang)
    out[:, 1] = np.sin(2.0 * ang)
    out[:, 2] = 0.0
    return out


def _inv_angle_double(params, p):
    ang = np.arctan2(p[1], p[0])
    out = []
    for half in (ang / 2.0, ang / 2.0 + np.pi):
        out.append(np.array([np.cos(half), np.sin(half), 1.0]))
    return out


def _imp_translate(params, x, set_idx):
    return x + np.asarray(params["offset"], dtype=float)


def _inv_translate(params, p):
    return [p - np.asarray(params["offset"], dtype=float)]


def _imp_radius_rescale(params, x, set_idx):
    return x * (params["eta"] / params["xi"])


def _inv_radius_rescale(params, p):
    if abs(np.hypot(p[0], p[1]) - params["eta"]) <= 1e-7:
        return [p * (params["xi"] / params["eta"])]
    return []


_IMPULSE_MAPS: dict[str, tuple[Callable, Callable]] = {
    "annulus_fold": (_imp_annulus_fold, _inv_annulus_fold),
    "plane_rescale": (_imp_plane_rescale, _inv_plane_rescale),
    "angle_double": (_imp_angle_double, _inv_angle_double),
    "translate": (_imp_translate, _inv_translate),
    "radius_rescale": (_imp_radius_rescale, _inv_radius_rescale),
}


# --------------------------------------------------------------------------
# Admissible regions
# --------------------------------------------------------------------------

def _adm_annulus(params, x):
    r = np.hypot(x[:, 0], x[:, 1])
    tol = params.get("tol", 1e-6)
    return (r >= params["rmin"] - tol) & (r <= params["rmax"] + tol)


def _adm_octant(params, x):
    tol = params.get("tol", 1e-6)
    return (x >= -tol).all(axis=1)


def _adm_cylinder(params, x):
    tol = params.get("tol", 1e-6)
    r = np.hypot(x[:, 0], x[:, 1])
    h = x[:, 2]
    return (np.abs(r - 1.0) <= 1e-3) & (h >= -tol) & (h <= params["hmax"] + tol)


def _adm_box(params, x):
    tol = params.get("tol", 1e-6)
    lo = np.asarray(params["lo"], dtype=float)
    hi = np.asarray(params["hi"], dtype=float)
    return ((x >= lo - tol) & (x <= hi + tol)).all(axis=1)


_ADMISSIBLE: dict[str, Callable] = {
    "annulus_band": _adm_annulus,
    "nonneg_octant": _adm_octant,
    "cylinder": _adm_cylinder,
    "box": _adm_box,
}


@dataclass(frozen=True)
class SystemSpec:
    """A complete impulsive dynamical system: continuous field, impulsive set
    (a finite union of constrained level-set pieces), its image description,
    and the impulse map."""

    name: str
    field: VectorFieldSpec
    impulsive_sets: tuple[ImpulsiveSetSpec, ...]
    image_sets: tuple[ImpulsiveSetSpec, ...]
    impulse: ImpulseMapSpec
    admissible_id: str
    admissible_params: Mapping[str, object] = field(default_factory=dict)
    state_names: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "admissible_params", dict(self.admissible_params))
        if not self.state_names:
            object.__setattr__(
                self, "state_names",
                tuple(f"x{i + 1}" for i in range(self.dim)),
            )

    @property
    def dim(self) -> int:
        return system_dimension(self.field)

    def admissible(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        ok = _ADMISSIBLE[self.admissible_id](self.admissible_params, np.atleast_2d(x))
        return bool(ok[0]) if single else ok

    def in_impulsive_set(self, x: np.ndarray, tol: float | None = None):
        """Index of the first impulsive-set piece containing x, or -1."""
        for j, piece in enumerate(self.impulsive_sets):
            if piece.contains(x, tol):
                return j
        return -1


def apply_impulse(sys: SystemSpec, x: np.ndarray) -> np.ndarray:
    """Apply the impulse map at a state of the impulsive set.

    Raises ValueError when x is not on the set within its membership
    tolerance.
    """
    x = np.asarray(x, dtype=float)
    j = sys.in_impulsive_set(x)
    if j < 0:
        raise ValueError("state is not on the impulsive set")
    fn, _ = _IMPULSE_MAPS[sys.impulse.map_id]
    return fn(sys.impulse.params, x[None, :], np.array([j]))[0]


def impulse_preimages(sys: SystemSpec, p: np.ndarray) -> list[np.ndarray]:
    """All impulsive-set states mapping to ``p`` under the impulse map
    (analytic inverses of the builtin maps); empty when p is off the image.

    Every inverse branch is validated by the forward map: q counts only when
    q lies on the impulsive set and I(q) reproduces p.
    """
    p = np.asarray(p, dtype=float)
    fwd, inv = _IMPULSE_MAPS[sys.impulse.map_id]
    out = []
    tol = 1e-7 * (1.0 + float(np.linalg.norm(p)))
    for q in inv(sys.impulse.params, p):
        j = sys.in_impulsive_set(q, tol=1e-7)
        if j < 0:
            continue
        back = fwd(sys.impulse.params, q[None, :], np.array([j]))[0]
        if np.linalg.norm(back - p) <= tol:
            out.append(q)
    return out


# --------------------------------------------------------------------------
# Batch propagation with event handling
# --------------------------------------------------------------------------

class _BatchRun:
    """Mutable state of one batched impulsive propagation."""

    def __init__(self, n, dim, sample_grid, durations):
        self.final = np.zeros((n, dim))
        self.final_t = np.zeros(n)
        self.hit_times = [[] for _ in range(n)]
        self.hit_pre = [[] for _ in range(n)]
        self.hit_post = [[] for _ in range(n)]
        self.discarded = 0
        self.durations = durations
        if sample_grid is not None:
            self.samples = np.full((n, len(sample_grid), dim), np.nan)
            self.ptr = np.zeros(n, dtype=int)
        else:
            self.samples = None
            self.ptr = None


def _propagate(sys: SystemSpec, x0: np.ndarray, durations, cfg: IntegratorConfig,
               sample_grid: np.ndarray | None = None,
               stop_at_first_hit: bool = False,
               min_gap: float = _DEFAULT_MIN_GAP,
               check_region: bool = True,
               time_sign: float = 1.0,
               ignore_directions: bool = False) -> _BatchRun:
    """Advance a batch of states through the impulsive semiflow.

    Each member runs for its own duration.  Hits of every impulsive-set piece
    are located by bisection of the dense output to _TIME_TOL, filtered by the
    piece's halfspace constraints and crossing direction; discarded crossings
    resume the scan inside the same step.

    time_sign=-1 integrates the reversed field (meaningful for the invertible
    builtin flows; used by backward reachability probes), in which case
    crossing directions are ignored unless stated.
    """
    X0 = np.atleast_2d(np.asarray(x0, dtype=float)).copy()
    n, dim = X0.shape
    durations = np.broadcast_to(np.asarray(durations, dtype=float), (n,)).copy()
    if (durations < 0).any():
        raise ValueError("durations must be nonnegative")
    run = _BatchRun(n, dim, sample_grid, durations)
    grid = sample_grid
    if grid is not None and len(grid) and grid[0] <= _COINCIDE_TOL:
        run.samples[:, 0] = X0
        run.ptr[:] = 1

    t = np.zeros(n)
    done = durations <= 0
    run.final[done] = X0[done]
    run.final_t[done] = 0.0
    sets = sys.impulsive_sets
    cvals = np.array([p.level_value for p in sets])
    imp_fn, _ = _IMPULSE_MAPS[sys.impulse.map_id]

    stepper = BatchStepper(make_rhs(sys.field, sign=time_sign), X0, cfg)
    stepper.active = ~done

    def levels_at(states):
        return np.stack(
            [level_value(p.level_id, states) - cvals[j] for j, p in enumerate(sets)],
            axis=1,
        )

    L_here = levels_at(stepper.y)

    def fill_samples(members, adv, y0, K, h, tau_by_member=None):
        """Fill grid samples for ``members`` advancing by adv (per member)."""
        if grid is None or len(members) == 0:
            return
        cut = t[members] + adv + _COINCIDE_TOL
        if tau_by_member is not None:
            # samples landing on the hit itself are written afterwards;
            # tau_by_member is indexed by global member id
            cut = np.minimum(cut, tau_by_member[members] - _COINCIDE_TOL)
        k0 = run.ptr[members]
        k1 = np.searchsorted(grid, cut, side="right")
        counts = np.maximum(k1 - k0, 0)
        total = int(counts.sum())
        if total == 0:
            return
        if len(members) == 1:
            m = members[0]
            g_idx = np.arange(k0[0], k0[0] + counts[0])
            u = np.clip((grid[g_idx] - t[m]) / h, 0.0, 1.0)
            powers = u[:, None] ** np.arange(1, 5)
            q = K[:, m].T @ _RK_P
            run.samples[m, g_idx] = y0[m] + h * (powers @ q.T)
        else:
            rows = np.repeat(np.arange(len(members)), counts)
            offs = np.concatenate([np.arange(c) for c in counts if c > 0])
            g_idx = k0[rows] + offs
            m_rep = members[rows]
            u = np.clip((grid[g_idx] - t[m_rep]) / h, 0.0, 1.0)
            states = dense_eval(y0[m_rep], K[:, m_rep], h, u)
            run.samples[m_rep, g_idx] = states
        run.ptr[members] = np.maximum(k0, k1)

    # members run a hair past their horizon before freezing, so a hit sitting
    # exactly on the horizon always lands strictly inside some step; genuine
    # hits never occur at horizon + slack because gaps are bounded below
    dur_ext = durations + _HORIZON_SLACK
    while not done.all():
        rem_ext = np.where(done, -np.inf, dur_ext - t)
        h_cap = max(float(rem_ext[~done].max()), 10 * cfg.min_step)
        h, y_prop, K = stepper.step(h_cap)
        y0 = stepper.y
        active = ~done
        L_new = levels_at(y_prop)

        # crossing scan; rescans handle constraint-discarded crossings
        hit_u = np.full(n, np.inf)
        hit_set = np.full(n, -1, dtype=int)
        scan_lo = np.zeros(n)
        L_lo = L_here.copy()
        scan = active.copy()
        adv_cap = np.where(active, np.minimum(rem_ext, h), 0.0)

        # guard against a double crossing hidden inside one step: probe the
        # midpoint, but only for members whose level runs near zero
        near = active & (
            np.minimum(np.abs(L_here), np.abs(L_new))
            <= 4.0 * np.abs(L_new - L_here) + 1e-12
        ).any(axis=1)
        if near.any():
            mid = dense_eval(y0[near], K[:, near], h, np.full(int(near.sum()), 0.5))
            L_mid = levels_at(mid)
            s0 = np.sign(L_here[near])
            s1 = np.sign(L_new[near])
            sm = np.sign(L_mid)
            bad = (s0 == s1) & (sm != s0) & (s0 != 0) & (sm != 0)
            if bad.any():
                raise AmbiguousCrossing(
                    "level sign changes twice inside one step; reduce max_step"
                )

        while scan.any():
            idx = np.flatnonzero(scan)
            scan[idx] = False
            cand_member, cand_set = [], []
            for j, piece in enumerate(sets):
                lo = L_lo[idx, j]
                hi = L_new[idx, j]
                # an exact zero at the step end counts as a crossing reached
                crosses = (np.sign(lo) != 0) & (np.sign(lo) * np.sign(hi) <= 0)
                if not ignore_directions:
                    if piece.direction > 0:
                        crosses &= lo < 0
                    elif piece.direction < 0:
                        crosses &= lo > 0
                for i in idx[crosses]:
                    cand_member.append(i)
                    cand_set.append(j)
            if not cand_member:
                continue
            cand_member = np.array(cand_member)
            cand_set = np.array(cand_set)
            lo_u = scan_lo[cand_member].copy()
            hi_u = np.ones(len(cand_member))
            sign_lo = np.sign(L_lo[cand_member, cand_set])
            n_iter = int(np.ceil(np.log2(max(h / _TIME_TOL, 2.0))))
            for _ in range(n_iter):
                mid_u = 0.5 * (lo_u + hi_u)
                states = dense_eval(y0[cand_member], K[:, cand_member], h, mid_u)
                for j in np.unique(cand_set):
                    sel = cand_set == j
                    lmid = level_value(sets[j].level_id, states[sel]) - cvals[j]
                    same = np.sign(lmid) == sign_lo[sel]
                    lo_sel = lo_u[sel]
                    hi_sel = hi_u[sel]
                    lo_sel[same] = mid_u[sel][same]
                    hi_sel[~same] = mid_u[sel][~same]
                    lo_u[sel] = lo_sel
                    hi_u[sel] = hi_sel
            cross_u = 0.5 * (lo_u + hi_u)

            # earliest candidate per member, ties to the lowest piece index
            order = np.lexsort((cand_set, cross_u, cand_member))
            member_sorted = cand_member[order]
            first = np.unique(member_sorted, return_index=True)[1]
            pick = order[first]
            for k in pick:
                i = cand_member[k]
                u = cross_u[k]
                if u * h > adv_cap[i]:
                    continue  # crossing beyond this member's horizon
                state = dense_eval(y0[i:i + 1], K[:, i:i + 1], h, np.array([u]))[0]
                piece = sets[cand_set[k]]
                if piece.constraint_mask(state[None, :])[0]:
                    hit_u[i] = u
                    hit_set[i] = cand_set[k]
                else:
                    run.discarded += 1
                    # resume the scan just past the discarded crossing
                    u_next = min(1.0, u + max(8 * _TIME_TOL, 1e-9) / h)
                    scan_lo[i] = u_next
                    probe = dense_eval(y0[i:i + 1], K[:, i:i + 1], h, np.array([u_next]))
                    L_lo[i] = levels_at(probe)[0]
                    scan[i] = True

        hit_members = np.flatnonzero(np.isfinite(hit_u))
        adv = np.where(active, np.minimum(rem_ext, h), 0.0)
        adv[hit_members] = hit_u[hit_members] * h
        tau_map = None
        if len(hit_members):
            tau_map = np.full(n, np.inf)
            tau_map[hit_members] = t[hit_members] + adv[hit_members]

        fill_samples(np.flatnonzero(active), adv[active], y0, K, h, tau_map)

        y_commit = y_prop.copy()
        y_commit[done] = y0[done]

        if len(hit_members):
            pre_states = dense_eval(y0[hit_members], K[:, hit_members], h,
                                    hit_u[hit_members])
            post_states = imp_fn(sys.impulse.params, pre_states, hit_set[hit_members])
            for row, i in enumerate(hit_members):
                tau = t[i] + adv[i]
                prev = run.hit_times[i][-1] if run.hit_times[i] else 0.0
                if run.hit_times[i] and tau - prev < min_gap:
                    raise GapUnderflow(
                        f"hit gap {tau - prev:.3e} below {min_gap:.0e}; the impulse "
                        "image is numerically touching the impulsive set"
                    )
                run.hit_times[i].append(tau)
                run.hit_pre[i].append(pre_states[row])
                run.hit_post[i].append(post_states[row])
                if grid is not None and run.ptr[i] < len(grid) \
                        and abs(grid[run.ptr[i]] - tau) <= _COINCIDE_TOL:
                    run.samples[i, run.ptr[i]] = post_states[row]
                    run.ptr[i] += 1
            if stop_at_first_hit:
                y_commit[hit_members] = pre_states
            else:
                y_commit[hit_members] = post_states

        t_new = t + adv
        finish = active & (rem_ext <= h)
        finish[hit_members] = False
        if finish.any():
            u_end = np.clip((durations[finish] - t[finish]) / h, 0.0, 1.0)
            run.final[finish] = dense_eval(y0[finish], K[:, finish], h, u_end)
            run.final_t[finish] = durations[finish]
            t_new[finish] = durations[finish]
            y_commit[finish] = run.final[finish]
        if stop_at_first_hit and len(hit_members):
            run.final[hit_members] = y_commit[hit_members]
            run.final_t[hit_members] = t_new[hit_members]
            finish = finish.copy()
            finish[hit_members] = True
        newly_hit_done = hit_members[durations[hit_members] - t_new[hit_members]
                                     <= _HORIZON_SLACK] if len(hit_members) else []
        if len(newly_hit_done):
            run.final[newly_hit_done] = y_commit[newly_hit_done]
            run.final_t[newly_hit_done] = durations[newly_hit_done]
            t_new[newly_hit_done] = durations[newly_hit_done]
            finish = finish.copy()
            finish[newly_hit_done] = True

        done = done | finish
        t = t_new
        stepper.commit(y_commit, K)
        if len(hit_members):
            stepper.refresh_derivative(hit_members)
        stepper.active = ~done
        # levels at the committed states: equal to L_new except where the
        # state was replaced by an impulse or frozen at the horizon
        L_here = L_new
        changed = finish.copy()
        changed[hit_members] = True
        if changed.any():
            L_here = L_new.copy()
            L_here[changed] = levels_at(stepper.y[changed])

        if check_region and (~done).any():
            ok = sys.admissible(stepper.y[~done])
            if not ok.all():
                bad = np.flatnonzero(~done)[~ok][0]
                raise RegionEscape(
                    f"trajectory left the admissible region of {sys.name!r} "
                    f"near state {stepper.y[bad]}"
                )

    return run


# --------------------------------------------------------------------------
# Trajectories
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ImpulsiveTrajectory:
    """A sampled impulsive orbit: flow segments, hit times, and the states
    just before / after each impulse.

    ``sample_states`` follow the right-continuity convention: a sample falling
    on a hit time carries the post-impulse state.  ``evaluate`` interpolates
    between samples of one flow segment with a cubic Hermite rule, so its
    error is far below every radius used by the ball tests.
    """

    system: SystemSpec
    initial_state: np.ndarray
    horizon: float
    dt_sample: float
    impulse_times: np.ndarray
    pre_impulse_states: np.ndarray
    post_impulse_states: np.ndarray
    sample_times: np.ndarray
    sample_states: np.ndarray
    final_state: np.ndarray
    _eval_times: np.ndarray = field(repr=False, default=None)
    _eval_states: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self._eval_times is None:
            times = [self.sample_times]
            states = [self.sample_states]
            # order keys: pre rows sort before post rows at the same time
            keys = [np.zeros(len(self.sample_times))]
            if len(self.impulse_times):
                times.append(self.impulse_times)
                states.append(self.pre_impulse_states)
                keys.append(np.full(len(self.impulse_times), -1.0))
                times.append(self.impulse_times)
                states.append(self.post_impulse_states)
                keys.append(np.full(len(self.impulse_times), 1.0))
            times.append(np.array([self.horizon]))
            states.append(self.final_state[None, :])
            keys.append(np.array([2.0]))
            tt = np.concatenate(times)
            ss = np.vstack(states)
            kk = np.concatenate(keys)
            order = np.lexsort((kk, tt))
            object.__setattr__(self, "_eval_times", tt[order])
            object.__setattr__(self, "_eval_states", ss[order])

    @property
    def n_impulses(self) -> int:
        return len(self.impulse_times)

    def segment_index(self, t) -> np.ndarray:
        """Number of impulses up to and including time t."""
        return np.searchsorted(self.impulse_times, np.asarray(t) * (1 + 1e-15),
                               side="right")

    def evaluate(self, t) -> np.ndarray:
        """State of the orbit at time(s) t in [0, horizon]."""
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        if (t_arr < -_COINCIDE_TOL).any() or (t_arr > self.horizon + _COINCIDE_TOL).any():
            raise ValueError("evaluation time outside [0, horizon]")
        tt, ss = self._eval_times, self._eval_states
        i = np.clip(np.searchsorted(tt, t_arr, side="right") - 1, 0, len(tt) - 1)
        out = ss[i].copy()
        frac_rows = np.flatnonzero(np.abs(tt[i] - t_arr) > _TIME_TOL)
        if len(frac_rows):
            i0 = i[frac_rows]
            i1 = np.minimum(i0 + 1, len(tt) - 1)
            t0, t1 = tt[i0], tt[i1]
            y0, y1 = ss[i0], ss[i1]
            dt = t1 - t0
            s = np.where(dt > 0, (t_arr[frac_rows] - t0) / np.where(dt > 0, dt, 1.0), 0.0)
            f0 = eval_vector_field(self.system.field, y0)
            f1 = eval_vector_field(self.system.field, y1)
            h00 = (1 + 2 * s) * (1 - s) ** 2
            h10 = s * (1 - s) ** 2
            h01 = s ** 2 * (3 - 2 * s)
            h11 = s ** 2 * (s - 1)
            out[frac_rows] = (h00[:, None] * y0 + h10[:, None] * dt[:, None] * f0
                              + h01[:, None] * y1 + h11[:, None] * dt[:, None] * f1)
        return out[0] if np.isscalar(t) or np.ndim(t) == 0 else out


def _grid_for(T: float, dt: float) -> np.ndarray:
    m = int(np.floor(T / dt + 1e-9))
    return dt * np.arange(m + 1)


def impulsive_trajectory(sys: SystemSpec, x: np.ndarray, T: float, dt_sample: float,
                         cfg: IntegratorConfig | None = None,
                         min_gap: float = _DEFAULT_MIN_GAP) -> ImpulsiveTrajectory:
    """Construct the impulsive orbit of x over [0, T], sampled every
    dt_sample, recording every hit up to T."""
    return impulsive_trajectory_batch(sys, np.asarray(x, dtype=float)[None, :],
                                      T, dt_sample, cfg, min_gap)[0]


def impulsive_trajectory_batch(sys: SystemSpec, X: np.ndarray, T: float,
                               dt_sample: float,
                               cfg: IntegratorConfig | None = None,
                               min_gap: float = _DEFAULT_MIN_GAP
                               ) -> list[ImpulsiveTrajectory]:
    """Batch form of ``impulsive_trajectory``; one shared integration."""
    if T <= 0:
        raise ValueError("horizon T must be positive")
    if dt_sample <= 0:
        raise ValueError("dt_sample must be positive")
    cfg = cfg or IntegratorConfig()
    X = np.atleast_2d(np.asarray(X, dtype=float))
    grid = _grid_for(T, dt_sample)
    run = _propagate(sys, X, np.full(len(X), float(T)), cfg,
                     sample_grid=grid, min_gap=min_gap)
    out = []
    for i in range(len(X)):
        out.append(ImpulsiveTrajectory(
            system=sys,
            initial_state=X[i].copy(),
            horizon=float(T),
            dt_sample=float(dt_sample),
            impulse_times=np.array(run.hit_times[i]),
            pre_impulse_states=(np.array(run.hit_pre[i])
                                if run.hit_times[i] else np.zeros((0, X.shape[1]))),
            post_impulse_states=(np.array(run.hit_post[i])
                                 if run.hit_times[i] else np.zeros((0, X.shape[1]))),
            sample_times=grid.copy(),
            sample_states=run.samples[i],
            final_state=run.final[i],
        ))
    return out


def first_hitting_time(sys: SystemSpec, x: np.ndarray, t_max: float,
                       cfg: IntegratorConfig | None = None,
                       reverse: bool = False,
                       check_region: bool = True):
    """First time in (0, t_max] at which the orbit of x reaches the impulsive
    set, together with the hit state; None when the set is not reached.

    The crossing is bracketed by integration steps and refined by bisection of
    the dense output to 1e-12 in time; crossings failing the set's halfspace
    constraints are discarded and the search continues.  reverse=True probes
    the time-reversed flow (any crossing direction) for backward reachability.
    """
    if t_max <= 0:
        raise ValueError("t_max must be positive")
    cfg = cfg or IntegratorConfig()
    x = np.asarray(x, dtype=float)
    run = _propagate(sys, x[None, :], np.array([float(t_max)]), cfg,
                     stop_at_first_hit=True,
                     time_sign=-1.0 if reverse else 1.0,
                     ignore_directions=reverse,
                     check_region=check_region)
    if run.hit_times[0]:
        return run.hit_times[0][0], run.hit_pre[0][0]
    return None


def psi(sys: SystemSpec, x: np.ndarray, t: float,
        cfg: IntegratorConfig | None = None) -> np.ndarray:
    """Evaluate the impulsive semiflow at a single time; at a hit time the
    value is the post-impulse state."""
    return psi_batch(sys, np.asarray(x, dtype=float)[None, :], np.array([t]), cfg)[0]


def psi_batch(sys: SystemSpec, X: np.ndarray, times: np.ndarray,
              cfg: IntegratorConfig | None = None) -> np.ndarray:
    """Evaluate the impulsive semiflow for a batch of (state, time) pairs."""
    cfg = cfg or IntegratorConfig()
    times = np.asarray(times, dtype=float)
    if (times < 0).any():
        raise ValueError("the impulsive semiflow is defined for t >= 0")
    run = _propagate(sys, X, times, cfg)
    return run.final


# --------------------------------------------------------------------------
# CSV export
# --------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def write_trajectory_csv(traj: ImpulsiveTrajectory, path) -> None:
    """Sampled orbit as CSV: t, coordinates, segment index, impulse flag.

    Rows are the uniform samples plus one flagged row per impulse carrying the
    post-impulse state.
    """
    names = traj.system.state_names
    rows = []
    seg = traj.segment_index(traj.sample_times)
    for k, t in enumerate(traj.sample_times):
        rows.append((t, 0, traj.sample_states[k], seg[k], 0))
    for n, tau in enumerate(traj.impulse_times):
        rows.append((tau, 1, traj.post_impulse_states[n], n + 1, 1))
    rows.sort(key=lambda r: (r[0], r[1]))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", *names, "segment_index", "is_impulse"])
        for t, _, state, s, flag in rows:
            w.writerow([_fmt(t), *(_fmt(v) for v in state), s, flag])


def write_impulses_csv(traj: ImpulsiveTrajectory, path) -> None:
    """Hit schedule as CSV: impulse index, hit time, post-impulse state."""
    names = traj.system.state_names
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "tau_n", *names])
        for n, tau in enumerate(traj.impulse_times):
            w.writerow([n + 1, _fmt(tau),
                        *(_fmt(v) for v in traj.post_impulse_states[n])])
