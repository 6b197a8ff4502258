"""Simultaneous polynomial root finding (Aberth-Ehrlich iteration).

Deterministic by construction: initial guesses come from the Newton polygon
of the coefficient moduli (annulus radii) with fixed angular offsets, and
the sweep uses Jacobi-style simultaneous updates so results do not depend
on thread scheduling.  Evaluation at |z| > 1 goes through the reversed
polynomial at 1/z, so degrees in the thousands do not overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit, prange

from .errors import RootFindingError

_MAX_SWEEPS = 1000
_STEP_TOL = 1e-14
_PARALLEL_CUTOFF = 96
_CLUSTER_SKIP_DEGREE = 64


@dataclass(frozen=True)
class PolyRoots:
    """Roots of a polynomial, repeated per multiplicity.

    multiplicities[i] is the size of the root cluster containing roots[i]
    (1 for simple roots); residual is max |p(root)| over all roots, with the
    coefficients normalized to unit max modulus so the number is scale-free.
    """

    roots: np.ndarray
    multiplicities: np.ndarray
    residual: float


@njit(cache=True)
def _newton_ratio(c, dc, crev, dcrev, n, z):
    """p(z)/p'(z), via the reversed polynomial at 1/z when |z| > 1."""
    if abs(z) <= 1.0:
        p = 0j
        for k in range(n, -1, -1):
            p = p * z + c[k]
        dp = 0j
        for k in range(n - 1, -1, -1):
            dp = dp * z + dc[k]
        if dp == 0:
            return 1e-12 + 0j
        return p / dp
    u = 1.0 / z
    q = 0j
    for k in range(n, -1, -1):
        q = q * u + crev[k]
    dq = 0j
    for k in range(n - 1, -1, -1):
        dq = dq * u + dcrev[k]
    den = n * q - u * dq
    if den == 0:
        return 1e-12 + 0j
    return z * q / den


@njit(cache=True)
def _backward_error(c, crev, n, z):
    """|p(z)| / sum |a_k||z|^k, a scale-free residual."""
    if abs(z) <= 1.0:
        p = 0j
        s = 0.0
        for k in range(n, -1, -1):
            p = p * z + c[k]
            s = s * abs(z) + abs(c[k])
        if s == 0.0:
            return 0.0
        return abs(p) / s
    u = 1.0 / z
    q = 0j
    s = 0.0
    for k in range(n, -1, -1):
        q = q * u + crev[k]
        s = s * abs(u) + abs(crev[k])
    if s == 0.0:
        return 0.0
    return abs(q) / s


@njit(cache=True)
def _aberth_sweeps(c, dc, crev, dcrev, roots, max_sweeps, step_tol):
    n = len(c) - 1
    cur = roots.copy()
    nxt = roots.copy()
    best = 1e300
    stalled = 0
    for sweep in range(max_sweeps):
        worst = 0.0
        for i in range(n):
            zi = cur[i]
            w = _newton_ratio(c, dc, crev, dcrev, n, zi)
            acc = 0j
            for j in range(n):
                if j != i:
                    dz = zi - cur[j]
                    if dz == 0:
                        dz = 1e-20 + 0j
                    acc += 1.0 / dz
            den = 1.0 - w * acc
            if den == 0:
                delta = w
            else:
                delta = w / den
            cap = 0.5 * (1.0 + abs(zi))
            if abs(delta) > cap:
                delta = delta * (cap / abs(delta))
            nxt[i] = zi - delta
            # relative to |z| itself, so roots far below unit scale still
            # iterate to full precision in their own scale
            rel = abs(delta) / (abs(zi) + 1e-300)
            if rel > worst:
                worst = rel
        cur, nxt = nxt, cur
        if worst < step_tol:
            return cur, sweep + 1
        # multiple-root clusters stall around the cluster radius; the
        # backward-error check after the sweep decides whether that is fine
        if worst < 0.5 * best:
            best = worst
            stalled = 0
        else:
            stalled += 1
            if stalled > 25 and worst < 1e-6:
                return cur, sweep + 1
    return cur, max_sweeps


@njit(cache=True, parallel=True)
def _aberth_sweeps_parallel(c, dc, crev, dcrev, roots, max_sweeps, step_tol):
    n = len(c) - 1
    cur = roots.copy()
    nxt = roots.copy()
    rel = np.zeros(n)
    best = 1e300
    stalled = 0
    for sweep in range(max_sweeps):
        for i in prange(n):
            zi = cur[i]
            w = _newton_ratio(c, dc, crev, dcrev, n, zi)
            acc = 0j
            for j in range(n):
                if j != i:
                    dz = zi - cur[j]
                    if dz == 0:
                        dz = 1e-20 + 0j
                    acc += 1.0 / dz
            den = 1.0 - w * acc
            if den == 0:
                delta = w
            else:
                delta = w / den
            cap = 0.5 * (1.0 + abs(zi))
            if abs(delta) > cap:
                delta = delta * (cap / abs(delta))
            nxt[i] = zi - delta
            # relative to |z| itself, so roots far below unit scale still
            # iterate to full precision in their own scale
            rel[i] = abs(delta) / (abs(zi) + 1e-300)
        tmp = cur
        cur = nxt
        nxt = tmp
        worst = rel.max()
        if worst < step_tol:
            return cur, sweep + 1
        if worst < 0.5 * best:
            best = worst
            stalled = 0
        else:
            stalled += 1
            if stalled > 25 and worst < 1e-6:
                return cur, sweep + 1
    return cur, max_sweeps


@njit(cache=True)
def _polish(c, dc, crev, dcrev, roots, steps):
    n = len(c) - 1
    for i in range(len(roots)):
        z = roots[i]
        for _ in range(steps):
            z = z - _newton_ratio(c, dc, crev, dcrev, n, z)
        roots[i] = z
    return roots


def _initial_guesses(coeffs: np.ndarray) -> np.ndarray:
    """Newton-polygon annulus radii with deterministic angular spread."""
    n = len(coeffs) - 1
    mags = np.abs(coeffs)
    # upper convex hull of (k, log|a_k|), treating zero coefficients as -inf
    logs = np.where(mags > 0, np.log(np.maximum(mags, 1e-300)), -np.inf)
    hull = [0]
    for k in range(1, n + 1):
        if logs[k] == -np.inf:
            continue
        while len(hull) >= 2:
            k1, k2 = hull[-2], hull[-1]
            # keep hull upper-convex
            if (logs[k] - logs[k1]) * (k2 - k1) >= (logs[k2] - logs[k1]) * (k - k1):
                hull.pop()
            else:
                break
        hull.append(k)
    if hull[-1] != n:
        hull.append(n)
    guesses = np.empty(n, dtype=np.complex128)
    pos = 0
    golden = 0.3819660112501051
    for e in range(len(hull) - 1):
        k1, k2 = hull[e], hull[e + 1]
        m = k2 - k1
        if logs[k1] == -np.inf or logs[k2] == -np.inf:
            r = 1.0
        else:
            r = math.exp((logs[k1] - logs[k2]) / m)
        r = min(max(r, 1e-150), 1e150)
        phase = 2.0 * math.pi * (golden * (e + 1) + 0.25 / (n + 1))
        for j in range(m):
            ang = 2.0 * math.pi * j / m + phase
            guesses[pos] = r * complex(math.cos(ang), math.sin(ang))
            pos += 1
    return guesses


def _cluster_multiplicities(roots: np.ndarray) -> np.ndarray:
    """Group nearby roots; returns the cluster size for each root."""
    n = len(roots)
    mult = np.ones(n, dtype=np.int64)
    if n > _CLUSTER_SKIP_DEGREE:
        return mult
    parent = list(range(n))

    def findp(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            tol = 1e-6 * (1.0 + abs(roots[i]))
            if abs(roots[i] - roots[j]) < tol:
                parent[findp(i)] = findp(j)
    sizes: dict[int, int] = {}
    for i in range(n):
        r = findp(i)
        sizes[r] = sizes.get(r, 0) + 1
    for i in range(n):
        mult[i] = sizes[findp(i)]
    return mult


def find_roots(coeffs, max_sweeps: int = _MAX_SWEEPS) -> PolyRoots:
    """All complex roots of a polynomial (ascending coefficients).

    Raises RootFindingError if the backward error of any root exceeds
    tolerance after the sweep cap.
    """
    c = np.asarray(coeffs, dtype=np.complex128)
    if c.size == 0 or np.max(np.abs(c)) == 0.0:
        raise RootFindingError("zero polynomial has no well-defined roots")
    scale = np.max(np.abs(c))
    c = c / scale
    # trim negligible leading coefficients
    keep = c.size
    while keep > 1 and abs(c[keep - 1]) <= 1e-300:
        keep -= 1
    c = c[:keep]
    n = c.size - 1
    if n < 1:
        return PolyRoots(
            roots=np.empty(0, dtype=np.complex128),
            multiplicities=np.empty(0, dtype=np.int64),
            residual=0.0,
        )
    # factor out exact roots at the origin
    zeros_at_origin = 0
    while zeros_at_origin < n and c[zeros_at_origin] == 0:
        zeros_at_origin += 1
    core = c[zeros_at_origin:]
    m = core.size - 1
    found = np.empty(0, dtype=np.complex128)
    if m >= 1:
        dc = (core[1:] * np.arange(1, m + 1)).astype(np.complex128)
        crev = core[::-1].copy()
        dcrev = (crev[1:] * np.arange(1, m + 1)).astype(np.complex128)
        guesses = _initial_guesses(core)
        if m >= _PARALLEL_CUTOFF:
            found, _ = _aberth_sweeps_parallel(
                core, dc, crev, dcrev, guesses, max_sweeps, _STEP_TOL
            )
        else:
            found, _ = _aberth_sweeps(core, dc, crev, dcrev, guesses, max_sweeps, _STEP_TOL)
        found = _polish(core, dc, crev, dcrev, found, 3)
        worst = 0.0
        for z in found:
            worst = max(worst, _backward_error(core, crev, m, z))
        if worst > 1e-8:
            raise RootFindingError(f"root sweep stalled (backward error {worst:.3e})")
    roots = np.concatenate([np.zeros(zeros_at_origin, dtype=np.complex128), found])
    order = np.lexsort((roots.imag, roots.real))
    roots = roots[order]
    mult = _cluster_multiplicities(roots)
    # residual on the unit-normalized coefficient scale (log-guarded overflow)
    resid = 0.0
    full = c
    deg = len(full) - 1
    for z in roots:
        if abs(z) <= 1.0:
            v = 0j
            for k in range(deg, -1, -1):
                v = v * z + full[k]
            value = abs(v)
        else:
            u = 1.0 / z
            v = 0j
            for k in range(deg, -1, -1):
                v = v * u + full[deg - k]
            logval = (math.log(abs(v)) if v != 0 else -math.inf) + deg * math.log(abs(z))
            value = math.inf if logval > 700.0 else abs(v) * abs(z) ** deg
        resid = max(resid, value)
    return PolyRoots(roots=roots, multiplicities=mult, residual=float(resid))
