# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels. Mirrors pressem.kernels._pyref operation-for-operation;
built with -ffp-contract=off so both backends agree to float64 round-off."""

import numpy as np

cimport numpy as cnp
from libc.math cimport floor, fabs, pow, isnan

cnp.import_array()

BACKEND_NAME = "native"

cdef double _SNAP = 1e-9


def moving_average(x, int window):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] xa = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t n = xa.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n)
    if window == 1:
        out[:] = xa
        return out
    cdef Py_ssize_t half = window // 2
    cdef Py_ssize_t i
    cdef double acc = 0.0
    # running sum over the edge-replicated window; recomputed per step to
    # keep summation order fixed (matches the cumsum-difference reference
    # to round-off)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] padded = np.empty(n + 2 * half)
    for i in range(half):
        padded[i] = xa[0]
        padded[half + n + i] = xa[n - 1]
    for i in range(n):
        padded[half + i] = xa[i]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] csum = np.empty(n + 2 * half + 1)
    csum[0] = 0.0
    for i in range(n + 2 * half):
        csum[i + 1] = csum[i] + padded[i]
    for i in range(n):
        out[i] = (csum[i + window] - csum[i]) / window
    return out


def first_order_lag(u, double alpha):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ua = np.ascontiguousarray(u, dtype=np.float64)
    cdef Py_ssize_t n = ua.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n)
    cdef double y = 0.0
    cdef Py_ssize_t k
    if alpha >= 1.0:
        out[:] = ua
        return out
    for k in range(n):
        y += alpha * (ua[k] - y)
        out[k] = y
    return out


cdef inline void _cell_weights(double d, double step, Py_ssize_t n_points,
                               Py_ssize_t *cell, double *t) nogil:
    cdef double q = d / step
    cdef Py_ssize_t c = <Py_ssize_t>floor(q)
    cdef double frac = q - c
    if frac > 1.0 - _SNAP:
        c += 1
        frac = 0.0
    elif frac < _SNAP:
        frac = 0.0
    if c < 0:
        c = 0
        frac = 0.0
    elif c >= n_points - 1:
        c = n_points - 1
        frac = 0.0
    cell[0] = c
    t[0] = frac


cdef double _lookup(double[:, ::1] rows, double[::1] cs, double step,
                    double travel, double d, double v) nogil:
    cdef Py_ssize_t nb = cs.shape[0]
    cdef Py_ssize_t n_points = rows.shape[1]
    cdef Py_ssize_t cell, hi_cell, j
    cdef double t, w, flo, fhi
    if d < 0.0:
        d = 0.0
    elif d > travel:
        d = travel
    _cell_weights(d, step, n_points, &cell, &t)
    hi_cell = cell + 1 if cell + 1 < n_points else cell
    if nb == 1 or v <= cs[0]:
        return rows[0, cell] * (1.0 - t) + rows[0, hi_cell] * t
    if v >= cs[nb - 1]:
        return rows[nb - 1, cell] * (1.0 - t) + rows[nb - 1, hi_cell] * t
    j = 0
    while j + 1 < nb and cs[j + 1] <= v:
        j += 1
    w = (v - cs[j]) / (cs[j + 1] - cs[j])
    flo = rows[j, cell] * (1.0 - t) + rows[j, hi_cell] * t
    fhi = rows[j + 1, cell] * (1.0 - t) + rows[j + 1, hi_cell] * t
    return flo * (1.0 - w) + fhi * w


def table_lookup(values, centers, double step, double travel, double d, double v):
    cdef double[:, ::1] rows = np.ascontiguousarray(values, dtype=np.float64)
    cdef double[::1] cs = np.ascontiguousarray(centers, dtype=np.float64)
    return _lookup(rows, cs, step, travel, d, v)


def table_lookup_many(values, centers, double step, double travel, d, v):
    cdef double[:, ::1] rows = np.ascontiguousarray(values, dtype=np.float64)
    cdef double[::1] cs = np.ascontiguousarray(centers, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] da = np.ascontiguousarray(d, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] va = np.ascontiguousarray(v, dtype=np.float64)
    cdef Py_ssize_t n = da.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n)
    cdef Py_ssize_t k
    for k in range(n):
        out[k] = _lookup(rows, cs, step, travel, da[k], va[k])
    return out


def resample_to_grid(x, y, double step, Py_ssize_t n_points, double max_extrapolation):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] xa = np.ascontiguousarray(x, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ya = np.ascontiguousarray(y, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.full(n_points, np.nan)
    cdef Py_ssize_t n = xa.shape[0]
    if n == 0:
        return out
    cdef double lo = xa[0]
    cdef double hi = xa[n - 1]
    cdef double head_slope = 0.0
    cdef double tail_slope = 0.0
    cdef bint have_head = False
    cdef bint have_tail = False
    cdef Py_ssize_t i, j
    for i in range(1, n):
        if xa[i] > lo:
            head_slope = (ya[0] - ya[i]) / (lo - xa[i])
            have_head = True
            break
    for i in range(n - 2, -1, -1):
        if xa[i] < hi:
            tail_slope = (ya[n - 1] - ya[i]) / (hi - xa[i])
            have_tail = True
            break
    cdef double g, t
    cdef Py_ssize_t seg = 0
    for i in range(n_points):
        g = i * step
        if g < lo:
            if g >= lo - max_extrapolation:
                out[i] = ya[0] + head_slope * (g - lo) if have_head else ya[0]
            continue
        if g > hi:
            if g <= hi + max_extrapolation:
                out[i] = ya[n - 1] + tail_slope * (g - hi) if have_tail else ya[n - 1]
            continue
        # advance on <= so an exact tie lands on the last duplicate,
        # matching numpy.interp
        while seg + 2 < n and xa[seg + 1] <= g:
            seg += 1
        j = seg
        if g == xa[j]:
            out[i] = ya[j]
        elif j + 1 < n:
            if xa[j + 1] == xa[j]:
                out[i] = ya[j + 1]
            else:
                t = (g - xa[j]) / (xa[j + 1] - xa[j])
                out[i] = ya[j] + t * (ya[j + 1] - ya[j])
        else:
            out[i] = ya[j]
    return out


def simulate_press_core(disp, vel, acc, noise, duties_press, duties_release,
                        centers, double step, double travel, double gain,
                        double gamma, double lag_alpha, Py_ssize_t latency,
                        double spring, double damping, double mass_factor,
                        double fixed_duty):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] da = np.ascontiguousarray(disp, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] va = np.ascontiguousarray(vel, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] aa = np.ascontiguousarray(acc, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] nz = np.ascontiguousarray(noise, dtype=np.float64)
    cdef double[:, ::1] rows_p = np.ascontiguousarray(duties_press, dtype=np.float64)
    cdef double[:, ::1] rows_r = np.ascontiguousarray(duties_release, dtype=np.float64)
    cdef double[::1] cs = np.ascontiguousarray(centers, dtype=np.float64)
    cdef Py_ssize_t n = da.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] force = np.empty(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] duty_cmd = np.empty(n)
    cdef bint table_mode = fixed_duty < 0.0
    cdef double lag_y = 0.0
    cdef bint press_dir = False
    cdef Py_ssize_t k
    cdef double vk, ds, duty, u, f_inst
    for k in range(n):
        if table_mode:
            vk = va[k]
            if vk > 0.0:
                press_dir = True
            elif vk < 0.0:
                press_dir = False
            ds = da[k] + nz[k]
            if press_dir:
                duty = _lookup(rows_p, cs, step, travel, ds, fabs(vk))
            else:
                duty = _lookup(rows_r, cs, step, travel, ds, fabs(vk))
            if duty < 0.0:
                duty = 0.0
            elif duty > 1.0:
                duty = 1.0
        else:
            duty = fixed_duty
        duty_cmd[k] = duty
        u = duty_cmd[k - latency] if k >= latency else 0.0
        f_inst = gain * u if gamma == 1.0 else gain * pow(u, gamma)
        if lag_alpha >= 1.0:
            lag_y = f_inst
        else:
            lag_y += lag_alpha * (f_inst - lag_y)
        force[k] = lag_y + spring * da[k] + damping * va[k] + mass_factor * aa[k]
    return force, duty_cmd
