"""Independent oracles used by the tests: closed forms and brute-force
computations that never touch the library code paths they check."""

from itertools import combinations

import numpy as np


def annulus_position(r0: float, theta0: float, t: float) -> np.ndarray:
    """Closed-form rotation flow: radius constant, angle advances at unit
    speed."""
    return r0 * np.array([np.cos(theta0 + t), np.sin(theta0 + t)])


def annulus_impulse_schedule(r0: float, theta0: float, n: int):
    """Closed-form hit times and post-impulse radii for the folding annulus.

    First hit after 2*pi - theta0 (angle must reach 0 from theta0 going
    counterclockwise), every later hit after exactly pi; the radius follows
    r -> 1/2 + r/2.
    """
    theta0 = np.mod(theta0, 2 * np.pi)
    tau1 = 2 * np.pi - theta0
    taus = tau1 + np.pi * np.arange(n)
    radii = np.empty(n)
    r = r0
    for k in range(n):
        r = 0.5 + 0.5 * r
        radii[k] = r
    return taus, radii


def arc_cell_weights(bins: int, lo: float = -2.0, hi: float = 2.0) -> np.ndarray:
    """Arc-length distribution of the uniform measure on the unit circle arc
    from pi to 2*pi, over a square grid, by exact angular breakpoints."""
    edges = np.linspace(lo, hi, bins + 1)
    thetas = {np.pi, 2 * np.pi}
    for e in edges:
        if -1.0 <= e <= 1.0:
            c = np.arccos(np.clip(e, -1, 1))
            for th in (c, 2 * np.pi - c):
                if np.pi <= th <= 2 * np.pi:
                    thetas.add(float(th))
            s = np.arcsin(np.clip(e, -1, 1))
            for th in (np.pi - s, 2 * np.pi + s):
                thm = float(np.mod(th, 2 * np.pi))
                if np.pi <= thm <= 2 * np.pi:
                    thetas.add(thm)
    ths = np.sort(np.array(sorted(thetas)))
    width = (hi - lo) / bins
    w = np.zeros(bins * bins)
    for a, b in zip(ths[:-1], ths[1:]):
        mid = 0.5 * (a + b)
        x, y = np.cos(mid), np.sin(mid)
        i = min(int((x - lo) / width), bins - 1)
        j = min(int((y - lo) / width), bins - 1)
        w[i * bins + j] += (b - a) / np.pi
    return w


def packing_number(points: np.ndarray, eps: float) -> int:
    """Exact epsilon-packing number by exhaustive subset search (pure
    geometry)."""
    n = len(points)
    d = np.sqrt(np.sum((points[:, None, :] - points[None, :, :]) ** 2, axis=2))
    best = 0
    for mask in range(1 << n):
        idx = [i for i in range(n) if mask >> i & 1]
        if len(idx) <= best:
            continue
        if all(d[i, j] >= eps for i, j in combinations(idx, 2)):
            best = len(idx)
    return best


def doubling_separated_count(n_grid: int, T: int, eps: float) -> int:
    """Separated count for the angle grid under pure angle doubling: two grid
    angles are indistinguishable up to horizon T exactly when their gap stays
    below the chord threshold for doublings 0..T-1, which reduces to a minimal
    index gap on the cyclic grid."""
    eps_ang = 2 * np.arcsin(eps / 2)
    step = 2 * np.pi / n_grid
    m_min = int(np.ceil(eps_ang / (2 ** (T - 1) * step)))
    if m_min <= 1:
        return n_grid
    return n_grid // m_min


def prey_predator_rhs(x, params=None):
    """Independent transcription of the controlled three-species field."""
    p = {k: 1.0 for k in ("alpha1", "beta1", "beta2", "gamma2", "nu2", "mu1")}
    if params:
        p.update(params)
    x1, x2, x3 = x
    den = 1.0 + p["beta1"] * x1 + p["beta2"] * x2
    return np.array([
        -(x1 + p["alpha1"] * x3) * x1 / den,
        -(p["gamma2"] * x2 + p["nu2"] * x3) * x2 / den,
        -p["mu1"] * x3 / den,
    ])
