"""Pure-Python kernels. Same signatures and arithmetic as ``_kernels.pyx``."""

import math

import numpy as np

OK = 0
EXHAUSTED = 1


def tick_walk(sqrt_ticks, liquidity, active, sqrt_price, amount, given_asset1):
    """Walk a constant-product trade across unit ranges.

    ``sqrt_ticks`` holds the square roots of the tick prices (asset 2 per
    asset 1), ``liquidity[l]`` the liquidity ``L = sqrt(K_v)`` of the unit
    range ``(ticks[l], ticks[l + 1]]``. ``amount`` is the fee-free given leg
    in asset 1 (``given_asset1``) or asset 2.

    Returns ``(status, seg_range, seg_given, seg_solved, seg_residual,
    seg_crossed, final_active, final_sqrt_price)``. Each segment either
    ends on a tick (``seg_crossed`` is 1, ``seg_residual`` is the depleted
    real reserve computed from the un-snapped closed form) or completes the
    trade inside its range.
    """
    n_ranges = len(liquidity)
    seg_range, seg_given, seg_solved, seg_residual, seg_crossed = [], [], [], [], []
    s = float(sqrt_price)
    remaining = float(amount)
    down = (amount > 0) if given_asset1 else (amount < 0)
    status = OK

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

        if abs(remaining) < abs(to_bound):
            if given_asset1:
                x_new = x + remaining
                s_new = L / x_new
                solved = L * L / x_new - y
            else:
                y_new = y + remaining
                s_new = y_new / L
                solved = L * L / y_new - x
            seg_range.append(active)
            seg_given.append(remaining)
            seg_solved.append(solved)
            seg_residual.append(0.0)
            seg_crossed.append(0)
            s = s_new
            break

        # reaches the boundary: snap to the tick, record the depleted reserve
        if given_asset1:
            x_new = x + to_bound
            y_new = L * L / x_new
            solved = y_new - y
            residual = (y_new - L * s_b) if down else (x_new - L / s_b)
        else:
            y_new = y + to_bound
            x_new = L * L / y_new
            solved = x_new - x
            residual = (y_new - L * s_b) if down else (x_new - L / s_b)
        seg_range.append(active)
        seg_given.append(to_bound)
        seg_solved.append(solved)
        seg_residual.append(abs(residual))
        seg_crossed.append(1)
        s = s_b
        remaining = remaining - to_bound
        if remaining == 0.0:
            # exact landing on a tick stays in the lower range
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
        np.asarray(seg_range, dtype=np.int64),
        np.asarray(seg_given, dtype=np.float64),
        np.asarray(seg_solved, dtype=np.float64),
        np.asarray(seg_residual, dtype=np.float64),
        np.asarray(seg_crossed, dtype=np.int64),
        active,
        s,
    )


def cmmm_profit_margin(q_x, w_x, w_y, gamma, phi, dq):
    """Normalized LP profitability margin of a two-asset weighted-pool trade.

    For each inbound amount ``dq`` (asset x into the pool, asset y out)
    returns the left side of the LP profitability inequality divided by
    ``dq * q_y * q_x**(w_x/w_y)``; the trade is profitable for LPs when
    ``dq > 0`` and the margin is ``>= 0``. Evaluated with ``expm1``/``log1p``
    so small trades do not cancel.
    """
    dq = np.asarray(dq, dtype=np.float64)
    out = np.empty_like(dq)
    r = w_x / w_y
    lp_mult = 1.0 + gamma * (1.0 - phi) / (1.0 - gamma)
    gross_mult = 1.0 + gamma / (1.0 - gamma)
    for idx in range(dq.shape[0]):
        d = dq[idx]
        if d == 0.0:
            growth = r / q_x
        else:
            growth = math.expm1(r * math.log1p(d / q_x)) / d
        out[idx] = w_x * lp_mult - w_y * (q_x + d * gross_mult) * growth
    return out
