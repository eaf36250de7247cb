"""Compiled batched RK4 core for the learning fields.

Scalar loops over trajectories/actions keep the hot path allocation-free; the
public numpy field functions in dynamics.py define the same vector fields and
a consistency test ties the two implementations together.  States below
floor_eps are clamped after every full step and each simplex block is
renormalized; a non-finite update freezes the trajectory at its last finite
state and records the failing step.
"""

import numpy as np
from numba import njit

FIELD_REPLICATOR = 0
FIELD_GDA = 1
FIELD_MEMORYLESS = 2


@njit(cache=True)
def _eval_field(code, U, Xc, yc, dX, dy, Uy, xst):
    mx, my = Xc.shape
    for i in range(mx):
        su = 0.0
        sx = 0.0
        for j in range(my):
            su += U[i, j] * yc[j]
            sx += Xc[i, j] * yc[j]
        Uy[i] = su
        xst[i] = sx
    if code == FIELD_REPLICATOR:
        # dX[i,j] = X[i,j] (g_ij - sum_i X[i,j] g_ij), g_ij = (Uy)_i y_j
        # dy[j]   = -y_j (h_j - sum_j y_j h_j),  h_j = (U^T xst)_j + (X^T Uy)_j
        for j in range(my):
            xg = 0.0
            for i in range(mx):
                xg += Xc[i, j] * Uy[i]
            gbar = xg * yc[j]
            for i in range(mx):
                dX[i, j] = Xc[i, j] * (Uy[i] * yc[j] - gbar)
            h = 0.0
            for i in range(mx):
                h += U[i, j] * xst[i]
            dy[j] = h + xg
        hbar = 0.0
        for j in range(my):
            hbar += yc[j] * dy[j]
        for j in range(my):
            dy[j] = yc[j] * (hbar - dy[j])
    elif code == FIELD_GDA:
        # projected gradient ascent/descent: mean-centered, no probability factor
        gsum = 0.0
        for i in range(mx):
            gsum += Uy[i]
        for j in range(my):
            xg = 0.0
            for i in range(mx):
                xg += Xc[i, j] * Uy[i]
            gmean = gsum * yc[j] / mx
            for i in range(mx):
                dX[i, j] = Uy[i] * yc[j] - gmean
            h = 0.0
            for i in range(mx):
                h += U[i, j] * xst[i]
            dy[j] = h + xg
        hmean = 0.0
        for j in range(my):
            hmean += dy[j]
        hmean /= my
        for j in range(my):
            dy[j] = hmean - dy[j]
    else:
        # memoryless replicator for both players; every column of X carries
        # the same mixed strategy, column 0 is authoritative
        xUy = 0.0
        for i in range(mx):
            xUy += Xc[i, 0] * Uy[i]
        for i in range(mx):
            dxi = Xc[i, 0] * (Uy[i] - xUy)
            for j in range(my):
                dX[i, j] = dxi
        for j in range(my):
            c = 0.0
            for i in range(mx):
                c += U[i, j] * Xc[i, 0]
            dy[j] = c
        ybar = 0.0
        for j in range(my):
            ybar += yc[j] * dy[j]
        for j in range(my):
            dy[j] = yc[j] * (ybar - dy[j])


@njit(cache=True)
def run_batch(U, X, y, dt, n_steps, floor, renormalize, record_every,
              field_code, track_q, X_rec, y_rec, clamp_rec, fail_step,
              q_min_delta):
    """Advance every trajectory n_steps RK4 steps, recording along the way.

    X (n, mx, my) and y (n, my) are updated in place and end at the final
    state (last finite state for failed trajectories).  Records land at steps
    {0, record_every, 2*record_every, ..., n_steps}.  When track_q is set
    (2x2 games), q_min_delta[t] collects the smallest one-step change of
    q_1 - q_2, the log-odds gap of the two conditional distributions.
    """
    n, mx, my = X.shape
    kX = np.empty((4, mx, my))
    ky = np.empty((4, my))
    Xc = np.empty((mx, my))
    yc = np.empty(my)
    Xp = np.empty((mx, my))
    yp = np.empty(my)
    Uy = np.empty(mx)
    xst = np.empty(mx)
    qprev = np.zeros(n)
    clamp_since = np.zeros(n, np.uint8)

    for t in range(n):
        for i in range(mx):
            for j in range(my):
                X_rec[0, t, i, j] = X[t, i, j]
        for j in range(my):
            y_rec[0, t, j] = y[t, j]
        clamp_rec[0, t] = 0
        if track_q:
            qprev[t] = (np.log(X[t, 0, 0]) - np.log(X[t, 1, 0])) - (
                np.log(X[t, 0, 1]) - np.log(X[t, 1, 1])
            )
            q_min_delta[t] = np.inf
    rec_i = 1

    for step in range(1, n_steps + 1):
        for t in range(n):
            if fail_step[t] >= 0:
                continue
            for i in range(mx):
                for j in range(my):
                    Xp[i, j] = X[t, i, j]
                    Xc[i, j] = X[t, i, j]
            for j in range(my):
                yp[j] = y[t, j]
                yc[j] = y[t, j]
            for stage in range(4):
                _eval_field(field_code, U, Xc, yc, kX[stage], ky[stage], Uy, xst)
                if stage < 3:
                    f = dt if stage == 2 else 0.5 * dt
                    for i in range(mx):
                        for j in range(my):
                            Xc[i, j] = Xp[i, j] + f * kX[stage, i, j]
                    for j in range(my):
                        yc[j] = yp[j] + f * ky[stage, j]
            ok = True
            fired = False
            w = dt / 6.0
            for i in range(mx):
                for j in range(my):
                    v = Xp[i, j] + w * (kX[0, i, j] + 2.0 * kX[1, i, j]
                                        + 2.0 * kX[2, i, j] + kX[3, i, j])
                    if not np.isfinite(v):
                        ok = False
                    X[t, i, j] = v
            for j in range(my):
                v = yp[j] + w * (ky[0, j] + 2.0 * ky[1, j] + 2.0 * ky[2, j] + ky[3, j])
                if not np.isfinite(v):
                    ok = False
                y[t, j] = v
            if ok:
                for j in range(my):
                    for i in range(mx):
                        if X[t, i, j] < floor:
                            X[t, i, j] = floor
                            fired = True
                    if y[t, j] < floor:
                        y[t, j] = floor
                        fired = True
                if renormalize:
                    for j in range(my):
                        cs = 0.0
                        for i in range(mx):
                            cs += X[t, i, j]
                        if cs > 0.0:
                            for i in range(mx):
                                X[t, i, j] /= cs
                        else:
                            ok = False
                    ss = 0.0
                    for j in range(my):
                        ss += y[t, j]
                    if ss > 0.0:
                        for j in range(my):
                            y[t, j] /= ss
                    else:
                        ok = False
            if not ok:
                for i in range(mx):
                    for j in range(my):
                        X[t, i, j] = Xp[i, j]
                for j in range(my):
                    y[t, j] = yp[j]
                fail_step[t] = step
                continue
            if fired:
                clamp_since[t] = 1
            if track_q:
                q = (np.log(X[t, 0, 0]) - np.log(X[t, 1, 0])) - (
                    np.log(X[t, 0, 1]) - np.log(X[t, 1, 1])
                )
                d = q - qprev[t]
                if d < q_min_delta[t]:
                    q_min_delta[t] = d
                qprev[t] = q
        if step % record_every == 0 or step == n_steps:
            for t in range(n):
                for i in range(mx):
                    for j in range(my):
                        X_rec[rec_i, t, i, j] = X[t, i, j]
                for j in range(my):
                    y_rec[rec_i, t, j] = y[t, j]
                clamp_rec[rec_i, t] = clamp_since[t]
                clamp_since[t] = 0
            rec_i += 1
    return rec_i
