"""Hartigan's dip test of unimodality.

The statistic follows Hartigan & Hartigan's construction (as restated in
Maechler's reference C code): alternate greatest-convex-minorant and
least-concave-majorant fits of the empirical CDF on a shrinking modal
interval, tracking the largest deviation. P-values come from a bootstrap
of the uniform null, which is the least favourable unimodal distribution.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .report import TestReport

DEFAULT_N_BOOT = 2000


def dip_statistic(x) -> float:
    """Dip of the empirical distribution of ``x`` (between 1/(2n) and 1/4)."""
    xs = np.sort(np.asarray(x, dtype=np.float64).ravel())
    n = xs.shape[0]
    if n < 4 or xs[0] == xs[-1]:
        return 0.0
    return _dip_sorted(xs.tolist()) / (2 * n)


def _dip_sorted(x: list) -> float:
    # Returns 2n·dip; indices are 0-based throughout.
    n = len(x)
    low, high = 0, n - 1
    dip = 0.0

    # mn[j]: predecessor of j on the convex minorant of x[0..j]
    mn = [0] * n
    for j in range(1, n):
        mn[j] = j - 1
        while True:
            a = mn[j]
            b = mn[a]
            if a == 0 or (x[j] - x[a]) * (a - b) < (x[a] - x[b]) * (j - a):
                break
            mn[j] = b
    # mj[k]: successor of k on the concave majorant of x[k..n-1]
    mj = [0] * n
    mj[n - 1] = n - 1
    for k in range(n - 2, -1, -1):
        mj[k] = k + 1
        while True:
            a = mj[k]
            b = mj[a]
            if a == n - 1 or (x[k] - x[a]) * (a - b) < (x[a] - x[b]) * (k - a):
                break
            mj[k] = b

    gcm = [0] * (n + 1)
    lcm = [0] * (n + 1)
    while True:
        # knots of the minorant on [low, high], from high down to low
        gcm[0] = high
        i = 0
        while gcm[i] > low:
            gcm[i + 1] = mn[gcm[i]]
            i += 1
        l_gcm = ig = i
        ix = ig - 1
        # knots of the majorant on [low, high], from low up to high
        lcm[0] = low
        i = 0
        while lcm[i] < high:
            lcm[i + 1] = mj[lcm[i]]
            i += 1
        l_lcm = ih = i
        iv = 1

        d = 0.0
        if l_gcm != 1 or l_lcm != 1:
            while True:
                gx = gcm[ix]
                lv = lcm[iv]
                if gx > lv:
                    gl = gcm[ix + 1]
                    dx = (lv - gl + 1) - (x[lv] - x[gl]) * (gx - gl) / (x[gx] - x[gl])
                    iv += 1
                    if dx >= d:
                        d = dx
                        ig = ix + 1
                        ih = iv - 1
                else:
                    ll = lcm[iv - 1]
                    dx = (x[gx] - x[ll]) * (lv - ll) / (x[lv] - x[ll]) - (gx - ll - 1)
                    ix -= 1
                    if dx >= d:
                        d = dx
                        ig = ix + 1
                        ih = iv
                if ix < 0:
                    ix = 0
                if iv > l_lcm:
                    iv = l_lcm
                if gcm[ix] == lcm[iv]:
                    break
        if d < dip:
            break

        # largest deviation of the minorant inside the current modal interval
        dip_l = 0.0
        for j in range(ig, l_gcm):
            jb, je = gcm[j + 1], gcm[j]
            best = 1.0
            if je - jb > 1 and x[je] != x[jb]:
                c = (je - jb) / (x[je] - x[jb])
                for jj in range(jb, je + 1):
                    t = (jj - jb + 1) - (x[jj] - x[jb]) * c
                    if t > best:
                        best = t
            if best > dip_l:
                dip_l = best
        # and of the majorant
        dip_u = 0.0
        for j in range(ih, l_lcm):
            jb, je = lcm[j], lcm[j + 1]
            best = 1.0
            if je - jb > 1 and x[je] != x[jb]:
                c = (je - jb) / (x[je] - x[jb])
                for jj in range(jb, je + 1):
                    t = (x[jj] - x[jb]) * c - (jj - jb - 1)
                    if t > best:
                        best = t
            if best > dip_u:
                dip_u = best
        dip = max(dip, dip_l, dip_u)

        if low == gcm[ig] and high == lcm[ih]:
            break
        low, high = gcm[ig], lcm[ih]
    return dip


@lru_cache(maxsize=32)
def uniform_null_dips(n: int, n_boot: int = DEFAULT_N_BOOT, seed: int = 0) -> np.ndarray:
    """Sorted dip statistics of ``n_boot`` uniform samples of size ``n``.

    Resample ``b`` draws from its own stream spawned from ``seed`` so results do
    not depend on evaluation order.
    """
    children = np.random.SeedSequence(seed).spawn(n_boot)
    dips = np.array([dip_statistic(np.random.default_rng(c).random(n)) for c in children])
    dips.sort()
    dips.setflags(write=False)
    return dips


def dip_test(x, n_boot: int = DEFAULT_N_BOOT, alpha: float = 0.05, seed: int = 0) -> TestReport:
    """Dip test with a bootstrap p-value against the uniform null."""
    x = np.asarray(x, dtype=np.float64).ravel()
    n = x.shape[0]
    if n < 10:
        raise ValueError(f"dip test needs at least 10 observations, got {n}")
    if not np.all(np.isfinite(x)):
        raise ValueError("dip test input contains non-finite values")
    d = dip_statistic(x)
    if d == 0.0:
        return TestReport("dip", 0.0, 1.0, alpha, n, 1, {"n_boot": n_boot, "seed": seed})
    null = uniform_null_dips(n, n_boot, seed)
    exceed = n_boot - np.searchsorted(null, d, side="left")
    p = (exceed + 1) / (n_boot + 1)
    return TestReport("dip", d, p, alpha, n, 1, {"n_boot": n_boot, "seed": seed})
