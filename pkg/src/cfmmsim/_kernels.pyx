# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels. Arithmetic mirrors ``_kernels_py`` operation for operation."""

import numpy as np
cimport numpy as cnp
from libc.math cimport expm1, log1p, fabs

cnp.import_array()

OK = 0
EXHAUSTED = 1


def tick_walk(double[:] sqrt_ticks, double[:] liquidity, Py_ssize_t active,
              double sqrt_price, double amount, bint given_asset1):
    cdef Py_ssize_t n_ranges = liquidity.shape[0]
    cdef Py_ssize_t cap = n_ranges + 1, m = 0
    cdef cnp.int64_t[:] seg_range = np.empty(cap, dtype=np.int64)
    cdef double[:] seg_given = np.empty(cap, dtype=np.float64)
    cdef double[:] seg_solved = np.empty(cap, dtype=np.float64)
    cdef double[:] seg_residual = np.empty(cap, dtype=np.float64)
    cdef cnp.int64_t[:] seg_crossed = np.empty(cap, dtype=np.int64)
    cdef double s = sqrt_price, remaining = amount
    cdef double L, s_b, x, y, to_bound, x_new, y_new, s_new, solved, residual
    cdef bint down = (amount > 0) if given_asset1 else (amount < 0)
    cdef bint at_bound
    cdef int status = OK

    while True:
        s_b = sqrt_ticks[active] if down else sqrt_ticks[active + 1]
        L = liquidity[active]
        at_bound = (s <= s_b) if down else (s >= s_b)
        if not at_bound:
            if L <= 0.0:
                status = EXHAUSTED
                break
            x = L / s
            y = L * s
            if given_asset1:
                to_bound = L / s_b - x
            else:
                to_bound = L * s_b - y
            at_bound = to_bound * remaining <= 0.0
        if at_bound:
            # already on the bound: move on without an empty segment
            s = s_b
            if down:
                if active == 0:
                    status = EXHAUSTED
                    break
                active -= 1
            else:
                if active == n_ranges - 1:
                    status = EXHAUSTED
                    break
                active += 1
            continue

        if fabs(remaining) < fabs(to_bound):
            if given_asset1:
                x_new = x + remaining
                s_new = L / x_new
                solved = L * L / x_new - y
            else:
                y_new = y + remaining
                s_new = y_new / L
                solved = L * L / y_new - x
            seg_range[m] = active
            seg_given[m] = remaining
            seg_solved[m] = solved
            seg_residual[m] = 0.0
            seg_crossed[m] = 0
            m += 1
            s = s_new
            break

        if given_asset1:
            x_new = x + to_bound
            y_new = L * L / x_new
            solved = y_new - y
        else:
            y_new = y + to_bound
            x_new = L * L / y_new
            solved = x_new - x
        residual = (y_new - L * s_b) if down else (x_new - L / s_b)
        seg_range[m] = active
        seg_given[m] = to_bound
        seg_solved[m] = solved
        seg_residual[m] = fabs(residual)
        seg_crossed[m] = 1
        m += 1
        s = s_b
        remaining = remaining - to_bound
        if remaining == 0.0:
            if down and active > 0:
                active -= 1
            break
        if down:
            if active == 0:
                status = EXHAUSTED
                break
            active -= 1
        else:
            if active == n_ranges - 1:
                status = EXHAUSTED
                break
            active += 1

    return (
        status,
        np.asarray(seg_range[:m]).copy(),
        np.asarray(seg_given[:m]).copy(),
        np.asarray(seg_solved[:m]).copy(),
        np.asarray(seg_residual[:m]).copy(),
        np.asarray(seg_crossed[:m]).copy(),
        active,
        s,
    )


def cmmm_profit_margin(double q_x, double w_x, double w_y, double gamma,
                       double phi, dq):
    cdef double[:] d_in = np.ascontiguousarray(dq, dtype=np.float64)
    cdef Py_ssize_t n = d_in.shape[0], idx
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[:] out = out_arr
    cdef double r = w_x / w_y
    cdef double lp_mult = 1.0 + gamma * (1.0 - phi) / (1.0 - gamma)
    cdef double gross_mult = 1.0 + gamma / (1.0 - gamma)
    cdef double d, growth
    for idx in range(n):
        d = d_in[idx]
        if d == 0.0:
            growth = r / q_x
        else:
            growth = expm1(r * log1p(d / q_x)) / d
        out[idx] = w_x * lp_mult - w_y * (q_x + d * gross_mult) * growth
    return out_arr
