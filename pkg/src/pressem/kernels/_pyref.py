"""Pure-Python/numpy reference implementations of the hot kernels.

This module is the behavioural reference for `pressem.kernels._native`; the
compiled backend mirrors the arithmetic order used here so results agree to
float64 round-off. Batch helpers lean on numpy; the closed-loop press core is
a plain-float loop because each tick depends on the previous one.
"""

import math

import numpy as np

BACKEND_NAME = "python"

# Snap tolerance for grid-cell indexing, as a fraction of one grid step.
# Displacements within this distance of a grid point evaluate to the stored
# sample exactly.
_SNAP = 1e-9


def moving_average(x: np.ndarray, window: int) -> np.ndarray:
    """Centered moving average with edge replication; output length == input."""
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    if window == 1:
        return x.copy()
    half = window // 2
    padded = np.empty(n + 2 * half)
    padded[:half] = x[0]
    padded[half:half + n] = x
    padded[half + n:] = x[-1]
    csum = np.zeros(padded.shape[0] + 1)
    np.cumsum(padded, out=csum[1:])
    return (csum[window:] - csum[:-window]) / window


def first_order_lag(u: np.ndarray, alpha: float) -> np.ndarray:
    """Discrete first-order lag y[k] = y[k-1] + alpha*(u[k] - y[k-1]), y[-1] = 0."""
    u = np.asarray(u, dtype=np.float64)
    if alpha >= 1.0:
        return u.copy()
    out = np.empty_like(u)
    y = 0.0
    values = u.tolist()
    for k, uk in enumerate(values):
        y += alpha * (uk - y)
        out[k] = y
    return out


def resample_to_grid(x: np.ndarray, y: np.ndarray, step: float, n_points: int,
                     max_extrapolation: float) -> np.ndarray:
    """Resample samples (x, y) onto the uniform grid k*step by linear interpolation.

    x must be non-decreasing. Grid points outside [x[0], x[-1]] are linearly
    extrapolated from the edge pair when within max_extrapolation, else NaN.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    grid = np.arange(n_points) * step
    out = np.full(n_points, np.nan)
    if x.shape[0] == 0:
        return out
    lo, hi = x[0], x[-1]
    inside = (grid >= lo) & (grid <= hi)
    if inside.any():
        out[inside] = np.interp(grid[inside], x, y)
    below = (grid < lo) & (grid >= lo - max_extrapolation)
    above = (grid > hi) & (grid <= hi + max_extrapolation)
    if below.any():
        out[below] = _edge_extrapolate(x, y, grid[below], head=True)
    if above.any():
        out[above] = _edge_extrapolate(x, y, grid[above], head=False)
    return out


def _edge_extrapolate(x, y, targets, head: bool):
    if head:
        anchor_x, anchor_y = x[0], y[0]
        idx = np.nonzero(x > anchor_x)[0]
        pair = (x[idx[0]], y[idx[0]]) if idx.size else None
    else:
        anchor_x, anchor_y = x[-1], y[-1]
        idx = np.nonzero(x < anchor_x)[0]
        pair = (x[idx[-1]], y[idx[-1]]) if idx.size else None
    if pair is None:
        return np.full(targets.shape, anchor_y)
    slope = (anchor_y - pair[1]) / (anchor_x - pair[0])
    return anchor_y + slope * (targets - anchor_x)


def _cell_weights(d, step, n_points):
    q = d / step
    cell = math.floor(q)
    t = q - cell
    if t > 1.0 - _SNAP:
        cell += 1
        t = 0.0
    elif t < _SNAP:
        t = 0.0
    if cell < 0:
        cell, t = 0, 0.0
    elif cell >= n_points - 1:
        cell, t = n_points - 1, 0.0
    return cell, t


def table_lookup(values: np.ndarray, centers: np.ndarray, step: float,
                 travel: float, d: float, v: float) -> float:
    """Bilinear lookup: linear in displacement over the grid, linear in velocity
    between adjacent bin centers, clamped at the extreme bins."""
    rows = values.tolist()
    cs = centers.tolist()
    return _lookup_lists(rows, cs, step, travel, len(rows[0]), d, v)


def _lookup_lists(rows, cs, step, travel, n_points, d, v):
    if d < 0.0:
        d = 0.0
    elif d > travel:
        d = travel
    cell, t = _cell_weights(d, step, n_points)
    hi_cell = cell + 1 if cell + 1 < n_points else cell
    nb = len(cs)
    if nb == 1 or v <= cs[0]:
        row = rows[0]
        return row[cell] * (1.0 - t) + row[hi_cell] * t
    if v >= cs[-1]:
        row = rows[-1]
        return row[cell] * (1.0 - t) + row[hi_cell] * t
    j = 0
    while j + 1 < nb and cs[j + 1] <= v:
        j += 1
    w = (v - cs[j]) / (cs[j + 1] - cs[j])
    lo_row, hi_row = rows[j], rows[j + 1]
    flo = lo_row[cell] * (1.0 - t) + lo_row[hi_cell] * t
    fhi = hi_row[cell] * (1.0 - t) + hi_row[hi_cell] * t
    return flo * (1.0 - w) + fhi * w


def table_lookup_many(values: np.ndarray, centers: np.ndarray, step: float,
                      travel: float, d: np.ndarray, v: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    centers = np.asarray(centers, dtype=np.float64)
    nb, n_points = values.shape
    d = np.clip(np.asarray(d, dtype=np.float64), 0.0, travel)
    q = d / step
    cell = np.floor(q).astype(np.intp)
    t = q - cell
    snap_hi = t > 1.0 - _SNAP
    cell[snap_hi] += 1
    t[snap_hi] = 0.0
    t[t < _SNAP] = 0.0
    np.clip(cell, 0, n_points - 1, out=cell)
    t[cell >= n_points - 1] = 0.0
    cell2 = np.minimum(cell + 1, n_points - 1)

    vc = np.clip(np.asarray(v, dtype=np.float64), centers[0], centers[-1])
    j = np.searchsorted(centers, vc, side="right") - 1
    np.clip(j, 0, nb - 1, out=j)
    j2 = np.minimum(j + 1, nb - 1)
    span = centers[j2] - centers[j]
    w = np.where(span > 0.0, (vc - centers[j]) / np.where(span > 0.0, span, 1.0), 0.0)

    flo = values[j, cell] * (1.0 - t) + values[j, cell2] * t
    fhi = values[j2, cell] * (1.0 - t) + values[j2, cell2] * t
    return flo * (1.0 - w) + fhi * w


def simulate_press_core(disp, vel, acc, noise, duties_press, duties_release,
                        centers, step, travel, gain, gamma, lag_alpha, latency,
                        spring, damping, mass_factor, fixed_duty):
    """Closed-loop press: per tick the controller sees noisy displacement and
    truth velocity, looks up a duty (or holds fixed_duty when >= 0), and the
    plant responds with latency + first-order lag + passive mechanics.

    Returns (sensed force, commanded duty) arrays. Initial direction is
    release; direction is held through zero velocity.
    """
    n = disp.shape[0]
    force = np.empty(n)
    duty_cmd = np.empty(n)
    d_list = disp.tolist()
    v_list = vel.tolist()
    a_list = acc.tolist()
    nz = noise.tolist()
    table_mode = fixed_duty < 0.0
    if table_mode:
        rows_p = duties_press.tolist()
        rows_r = duties_release.tolist()
        cs = centers.tolist()
        n_points = len(rows_p[0])
    duties = []
    lag_y = 0.0
    press_dir = False
    for k in range(n):
        if table_mode:
            vk = v_list[k]
            if vk > 0.0:
                press_dir = True
            elif vk < 0.0:
                press_dir = False
            rows = rows_p if press_dir else rows_r
            ds = d_list[k] + nz[k]
            duty = _lookup_lists(rows, cs, step, travel, n_points, ds, abs(vk))
            if duty < 0.0:
                duty = 0.0
            elif duty > 1.0:
                duty = 1.0
        else:
            duty = fixed_duty
        duties.append(duty)
        duty_cmd[k] = duty
        u = duties[k - latency] if k >= latency else 0.0
        f_inst = gain * u if gamma == 1.0 else gain * (u ** gamma)
        if lag_alpha >= 1.0:
            lag_y = f_inst
        else:
            lag_y += lag_alpha * (f_inst - lag_y)
        force[k] = lag_y + spring * d_list[k] + damping * v_list[k] + mass_factor * a_list[k]
    return force, duty_cmd
