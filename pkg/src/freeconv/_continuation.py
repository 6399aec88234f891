"""Vectorized Newton solves and homotopy path tracking in the upper half-plane.

An *equation* is a callable ``eq(u, zeta) -> (E, E_u, E_zeta)`` acting
elementwise on complex arrays. The tracker follows the solution ``u(zeta)``
of ``E(u, zeta) = 0`` along the straight segment from ``zeta_start`` to
``zeta_end``, with step lengths tied to the distance to the real axis.
"""

import numpy as np

NEWTON_TOL = 1e-10
SHRINK = 0.8
MIN_FRAC = 1e-6
MAX_NEWTON = 40
MAX_BACKTRACK = 30


def newton(eq, u, zeta, *, scale=1.0, tol=NEWTON_TOL, max_iter=MAX_NEWTON, imag_floor=None, extra=2):
    """Newton iterations from ``u``; returns ``(u, converged, residual)``.

    The residual is ``|E| / scale`` and convergence means
    ``residual <= tol * (1 + |zeta| / scale)``. Steps that would put the iterate
    at or below ``imag_floor`` (default: the real axis, strictly) are halved;
    with ``imag_floor=0.0`` iterates may land on the real axis.
    """
    u = np.array(u, dtype=complex, copy=True)
    zeta = np.asarray(zeta, dtype=complex)
    limit = tol * (1.0 + np.abs(zeta) / scale)
    strict = imag_floor is None
    floor = 0.0 if strict else imag_floor

    E, Eu, _ = eq(u, zeta)
    res = np.abs(E) / scale
    conv = res <= limit
    budget = np.where(conv, extra, 0)  # polishing steps left for converged points
    alive = np.isfinite(res)
    for _ in range(max_iter + extra):
        active = np.nonzero(alive & (~conv | (budget > 0)))[0]
        if active.size == 0:
            break
        du = E[active] / Eu[active]
        base = u[active]
        cand = base - du
        lam = np.ones(active.size)
        for _ in range(MAX_BACKTRACK):
            bad = (cand.imag <= floor) if strict else (cand.imag < floor)
            bad |= ~np.isfinite(cand)
            if not bad.any():
                break
            lam[bad] *= 0.5
            cand[bad] = base[bad] - lam[bad] * du[bad]
        if not strict:
            cand.imag = np.maximum(cand.imag, floor) + 0.0  # never -0.0 on a branch cut
        En, Eun, _ = eq(cand, zeta[active])
        rn = np.abs(En) / scale
        was = conv[active]
        accept = ~was | (rn < res[active])
        sel = active[accept]
        u[sel] = cand[accept]
        E[sel], Eu[sel], res[sel] = En[accept], Eun[accept], rn[accept]
        budget[active[was]] -= 1
        budget[active[was & ~accept]] = 0
        newly = ~was & (rn <= limit[active])
        conv[active[newly]] = True
        budget[active[newly]] = extra
        alive[active[~was & ~np.isfinite(rn)]] = False
    conv &= np.isfinite(res)
    return u, conv, res


def track(eq, u, zeta_start, zeta_end, *, scale=1.0, tol=NEWTON_TOL, shrink=SHRINK, min_frac=MIN_FRAC,
          fallback=None):
    """Follow solutions from ``zeta_start`` to ``zeta_end``.

    ``u`` must solve the equation at ``zeta_start``. Each step moves at most
    ``frac * (1 - shrink) * Im(zeta)``; ``frac`` halves after a failed Newton
    solve and recovers after successes. A point fails once ``frac < min_frac``.
    ``fallback(u, zeta)`` may supply alternative starting points when
    Newton stalls (e.g. a damped fixed-point iteration).

    Returns ``(u, ok, residual)`` at ``zeta_end``; failed points keep their last
    good value.
    """
    u = np.array(u, dtype=complex, copy=True)
    zs = np.array(zeta_start, dtype=complex, copy=True)
    ze = np.asarray(zeta_end, dtype=complex)
    frac = np.ones(u.shape)
    ok = np.ones(u.shape, dtype=bool)
    res = np.zeros(u.shape)
    active = zs != ze
    while active.any():
        idx = np.nonzero(active)[0]
        zc = zs[idx]
        rem = ze[idx] - zc
        lim = frac[idx] * (1.0 - shrink) * zc.imag
        dist = np.abs(rem)
        step = np.where(dist <= lim, rem, rem / np.where(dist > 0, dist, 1.0) * lim)
        reached = dist <= lim
        zn = np.where(reached, ze[idx], zc + step)
        _, Eu, Ez = eq(u[idx], zc)
        pred = u[idx] - Ez / Eu * (zn - zc)
        pred = np.where(np.isfinite(pred) & (pred.imag > 0), pred, u[idx])
        un, conv, rn = newton(eq, pred, zn, scale=scale, tol=tol)
        if fallback is not None and not conv.all():
            miss = ~conv
            alt = fallback(u[idx][miss], zn[miss])
            ua, ca, ra = newton(eq, alt, zn[miss], scale=scale, tol=tol)
            sub = np.nonzero(miss)[0]
            un[sub[ca]], conv[sub[ca]], rn[sub[ca]] = ua[ca], True, ra[ca]
        good = idx[conv]
        u[good] = un[conv]
        zs[good] = zn[conv]
        res[good] = rn[conv]
        frac[good] = np.minimum(1.0, 2.0 * frac[good])
        bad = idx[~conv]
        frac[bad] *= 0.5
        gave_up = bad[frac[bad] < min_frac]
        ok[gave_up] = False
        if gave_up.size:
            E, _, _ = eq(u[gave_up], ze[gave_up])
            res[gave_up] = np.abs(E) / scale
        active = ok & (zs != ze)
    return u, ok, res
