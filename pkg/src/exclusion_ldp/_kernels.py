"""Compiled event loop shared by the untilted and tilted simulators.

Channels: bonds c = 0..L-2 exchange sites (c, c+1); channel L-1 flips site 0
and channel L flips site L-1.  Per-channel majorant rates live in a Fenwick
tree; with no tilt terms the majorant equals the true rate and no thinning
draw is made.
"""
from __future__ import annotations

import numpy as np
from numba import njit

STATUS_OK = 0
STATUS_MAJORANT_VIOLATED = 1
STATUS_EVENT_BUFFER_FULL = 2
STATUS_PARTICLE_COUNT = 3

KIND_RAMP = 0
KIND_LINEAR = 1
KIND_CONSTANT = 2

_REBUILD_EVERY = 1 << 16


@njit(cache=True)
def _bit_build(tree, vals):
    k = vals.size
    tree[0] = 0.0
    for i in range(1, k + 1):
        tree[i] = vals[i - 1]
    for i in range(1, k + 1):
        j = i + (i & -i)
        if j <= k:
            tree[j] += tree[i]


@njit(cache=True, inline="always")
def _bit_add(tree, i, delta):
    k = tree.size - 1
    j = i + 1
    while j <= k:
        tree[j] += delta
        j += j & -j


@njit(cache=True, inline="always")
def _bit_find(tree, u, top):
    k = tree.size - 1
    pos = 0
    step = top
    while step > 0:
        nxt = pos + step
        if nxt <= k and tree[nxt] <= u:
            pos = nxt
            u -= tree[nxt]
        step >>= 1
    if pos >= k:
        pos = k - 1
    return pos


@njit(cache=True, inline="always")
def time_profile(kind, t0, t1, amp, t):
    if t <= t0:
        return 0.0
    if kind == KIND_RAMP:
        s = (t - t0) / (t1 - t0)
        if s >= 1.0:
            return amp
        return amp * s * s * s * (10.0 + s * (-15.0 + 6.0 * s))
    if kind == KIND_LINEAR:
        return amp * (t - t0)
    return amp


@njit(cache=True, inline="always")
def _base_rate(c, eta, L, n2, n1, a, alpha, beta):
    if c < L - 1:
        if eta[c] == eta[c + 1]:
            return 0.0
        left = alpha if c == 0 else float(eta[c - 1])
        right = beta if c + 2 > L - 1 else float(eta[c + 2])
        return n2 * (1.0 + a * (left + right))
    if c == L - 1:
        e = float(eta[0])
        return n1 * (e * (1.0 - alpha) + (1.0 - e) * alpha)
    e = float(eta[L - 1])
    return n1 * (e * (1.0 - beta) + (1.0 - e) * beta)


@njit(cache=True, inline="always")
def _exponent(c, eta, L, t, n_terms, g_site, dg, kinds, t0s, t1s, amps, boundary_sign):
    """log of (tilted rate / untilted rate) for channel c at time t."""
    if c < L - 1:
        s = float(eta[c]) - float(eta[c + 1])
        acc = 0.0
        for k in range(n_terms):
            acc += time_profile(kinds[k], t0s[k], t1s[k], amps[k], t) * dg[k, c]
        return s * acc
    site = 0 if c == L - 1 else L - 1
    acc = 0.0
    for k in range(n_terms):
        acc += time_profile(kinds[k], t0s[k], t1s[k], amps[k], t) * g_site[k, site]
    return boundary_sign * (1.0 - 2.0 * float(eta[site])) * acc


@njit(cache=True, inline="always")
def _channel_coeffs(c, eta, L, n_terms, g_site, dg, boundary_sign, coef):
    """Fill coef[k] so that the channel exponent is sum_k phi_k(t) coef[k]."""
    if c < L - 1:
        s = float(eta[c]) - float(eta[c + 1])
        for k in range(n_terms):
            coef[k] = s * dg[k, c]
    else:
        site = 0 if c == L - 1 else L - 1
        s = boundary_sign * (1.0 - 2.0 * float(eta[site]))
        for k in range(n_terms):
            coef[k] = s * g_site[k, site]


@njit(cache=True, inline="always")
def _phase_exponent(t, n_terms, kinds, t0s, t1s, amps, coef):
    acc = 0.0
    for k in range(n_terms):
        acc += time_profile(kinds[k], t0s[k], t1s[k], amps[k], t) * coef[k]
    return acc


@njit(cache=True)
def _excess_integral(c, eta, L, ta, tb, n_terms, g_site, dg, kinds, t0s, t1s, amps,
                     boundary_sign, breaks, gl_x, gl_w, hmax, t_start, t_frozen, coef):
    """Integral over [ta, tb] of exp(exponent) - 1 for a frozen state.

    The field vanishes before ``t_start`` and is constant in time after
    ``t_frozen``; in between Gauss-Legendre panels are split at ``breaks``
    (kinks of the time profiles) and capped at length ``hmax``.
    """
    if ta < t_start:
        ta = t_start
    if tb <= ta:
        return 0.0
    _channel_coeffs(c, eta, L, n_terms, g_site, dg, boundary_sign, coef)
    total = 0.0
    if tb > t_frozen:
        lo_c = ta if ta > t_frozen else t_frozen
        total += (tb - lo_c) * np.expm1(_phase_exponent(lo_c, n_terms, kinds, t0s, t1s, amps, coef))
        tb = lo_c
        if tb <= ta:
            return total
    lo = ta
    nb = breaks.size
    bi = 0
    while bi < nb and breaks[bi] <= lo:
        bi += 1
    while lo < tb:
        hi = tb
        if bi < nb and breaks[bi] < hi:
            hi = breaks[bi]
            bi += 1
        npieces = int(np.ceil((hi - lo) / hmax))
        if npieces < 1:
            npieces = 1
        h = (hi - lo) / npieces
        for j in range(npieces):
            mid = lo + (j + 0.5) * h
            s = 0.0
            for q in range(gl_x.size):
                e = _phase_exponent(mid + 0.5 * h * gl_x[q], n_terms, kinds, t0s, t1s, amps, coef)
                s += gl_w[q] * np.expm1(e)
            total += 0.5 * h * s
        lo = hi
    return total


@njit(cache=True)
def simulate_path(eta, n, a, alpha, beta, horizon, seed,
                  snap_times, box_start, box_stop,
                  g_site, kinds, t0s, t1s, amps, boundary_sign,
                  bond_bound, flip_bound, breaks, gl_x, gl_w, hmax, t_start, t_frozen,
                  record, ev_times, ev_kind, ev_site):
    """Run one trajectory in place on ``eta``.

    Returns (status, n_events, n_proposals, log_jump, log_integral, snapshots,
    worst_ratio).
    """
    np.random.seed(seed)
    L = eta.size
    K = L + 1
    n2 = float(n) * float(n)
    n1 = float(n)
    n_terms = kinds.size
    tilted = n_terms > 0

    dg = np.zeros((n_terms, L - 1))
    for k in range(n_terms):
        for c in range(L - 1):
            dg[k, c] = g_site[k, c + 1] - g_site[k, c]

    bond_factor = np.exp(bond_bound) if tilted else 1.0
    flip_factor = np.exp(flip_bound) if tilted else 1.0

    coef = np.zeros(n_terms)
    base = np.zeros(K)
    maj = np.zeros(K)
    tau = np.zeros(K)
    for c in range(K):
        base[c] = _base_rate(c, eta, L, n2, n1, a, alpha, beta)
        maj[c] = base[c] * (bond_factor if c < L - 1 else flip_factor)
    tree = np.zeros(K + 1)
    _bit_build(tree, maj)
    total = maj.sum()
    top = 1
    while top * 2 <= K:
        top *= 2

    n_snap = snap_times.size
    n_box = box_start.size
    snaps = np.zeros((n_snap, n_box))
    si = 0

    particles = 0
    for i in range(L):
        particles += eta[i]

    status = 0
    n_events = 0
    n_prop = 0
    log_jump = 0.0
    log_int = 0.0
    worst = 0.0
    max_rec = ev_times.size
    t = 0.0
    since_rebuild = 0

    while True:
        if total <= 0.0:
            t_new = np.inf
        else:
            t_new = t - np.log(1.0 - np.random.random()) / total
        while si < n_snap and snap_times[si] < t_new:
            for b in range(n_box):
                acc = 0.0
                for i in range(box_start[b], box_stop[b]):
                    acc += eta[i]
                snaps[si, b] = acc / (box_stop[b] - box_start[b])
            si += 1
        if t_new > horizon:
            break
        t = t_new
        n_prop += 1
        c = _bit_find(tree, np.random.random() * total, top)
        if maj[c] <= 0.0:
            continue
        if tilted:
            e = _exponent(c, eta, L, t, n_terms, g_site, dg, kinds, t0s, t1s, amps,
                          boundary_sign)
            ratio = base[c] * np.exp(e) / maj[c]
            if ratio > worst:
                worst = ratio
            if ratio > 1.0 + 1e-12:
                status = STATUS_MAJORANT_VIOLATED
                break
            if np.random.random() >= ratio:
                continue
            log_jump += e

        # apply the event
        if c < L - 1:
            lo_site = c
            hi_site = c + 1
            kind = 0
            site = c
        else:
            site = 0 if c == L - 1 else L - 1
            lo_site = site
            hi_site = site
            kind = 1
        # channels whose rate depends on the changed sites
        c_lo = lo_site - 2
        if c_lo < 0:
            c_lo = 0
        c_hi = hi_site + 1
        if c_hi > L - 2:
            c_hi = L - 2
        # flush the excess-rate integral of affected channels under the old state
        if tilted and t > t_start:
            for cc in range(c_lo, c_hi + 1):
                if base[cc] > 0.0:
                    log_int += base[cc] * _excess_integral(
                        cc, eta, L, tau[cc], t, n_terms, g_site, dg, kinds, t0s, t1s, amps,
                        boundary_sign, breaks, gl_x, gl_w, hmax, t_start, t_frozen, coef)
                tau[cc] = t
            for cc in (L - 1, L):
                if (cc == L - 1 and lo_site == 0) or (cc == L and hi_site == L - 1):
                    log_int += base[cc] * _excess_integral(
                        cc, eta, L, tau[cc], t, n_terms, g_site, dg, kinds, t0s, t1s, amps,
                        boundary_sign, breaks, gl_x, gl_w, hmax, t_start, t_frozen, coef)
                    tau[cc] = t
        if kind == 1:
            eta[site] = 1 - eta[site]
            if eta[site] == 1:
                particles += 1
            else:
                particles -= 1
        else:
            tmp = eta[c]
            eta[c] = eta[c + 1]
            eta[c + 1] = tmp

        for cc in range(c_lo, c_hi + 1):
            nb = _base_rate(cc, eta, L, n2, n1, a, alpha, beta)
            nm = nb * bond_factor
            if nm == maj[cc]:
                continue
            _bit_add(tree, cc, nm - maj[cc])
            total += nm - maj[cc]
            base[cc] = nb
            maj[cc] = nm
        for cc in (L - 1, L):
            if (cc == L - 1 and lo_site == 0) or (cc == L and hi_site == L - 1):
                nb = _base_rate(cc, eta, L, n2, n1, a, alpha, beta)
                nm = nb * flip_factor
                _bit_add(tree, cc, nm - maj[cc])
                total += nm - maj[cc]
                base[cc] = nb
                maj[cc] = nm

        if record:
            if n_events < max_rec:
                ev_times[n_events] = t
                ev_kind[n_events] = kind
                ev_site[n_events] = site
            else:
                status = STATUS_EVENT_BUFFER_FULL
        n_events += 1
        since_rebuild += 1
        if since_rebuild >= _REBUILD_EVERY:
            _bit_build(tree, maj)
            total = maj.sum()
            since_rebuild = 0

    if tilted and status != STATUS_MAJORANT_VIOLATED:
        for cc in range(K):
            if base[cc] > 0.0:
                log_int += base[cc] * _excess_integral(
                    cc, eta, L, tau[cc], horizon, n_terms, g_site, dg, kinds, t0s, t1s, amps,
                    boundary_sign, breaks, gl_x, gl_w, hmax, t_start, t_frozen, coef)

    check = 0
    for i in range(L):
        check += eta[i]
    if check != particles and status == 0:
        status = STATUS_PARTICLE_COUNT
    return status, n_events, n_prop, log_jump, log_int, snaps, worst
