"""Lane-wise adaptive Dormand-Prince 5(4) integration of many complex ODEs.

Each column of the state array is an independent initial value problem with
its own time, step size and status.  All lanes are advanced together, one
attempted step per sweep, which keeps the work inside numpy.

The Butcher tableau, error weights and the quartic dense-output matrix are
taken from :class:`scipy.integrate.RK45`.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import RK45

ALIVE, EXITED, FAILED = 0, 1, 2

_A, _B, _C, _E, _P = RK45.A, RK45.B, RK45.C, RK45.E, RK45.P
_NSTAGE = len(_B)
_SAFETY, _MIN_FACTOR, _MAX_FACTOR = 0.9, 0.2, 10.0
_EVENT_ITERS = 60


@dataclass
class BatchResult:
    t: np.ndarray
    y: np.ndarray
    status: np.ndarray
    event_time: np.ndarray
    nsteps: np.ndarray
    messages: dict = field(default_factory=dict)
    samples: list = None

    def lane_samples(self, lane):
        """Recorded ``(t, y)`` history of one lane (requires ``record=True``)."""
        ts, ys = [], []
        for idx, t, y in self.samples:
            hit = np.nonzero(idx == lane)[0]
            if hit.size:
                ts.append(t[hit[0]])
                ys.append(y[:, hit[0]])
        return np.array(ts), np.array(ys).T


def _dense(y0, K, h, theta):
    """Dense output at fractions ``theta`` of each lane's step."""
    Q = np.einsum("smn,sk->mkn", K, _P)
    powers = np.cumprod(np.broadcast_to(theta, (_P.shape[1],) + theta.shape), axis=0)
    return y0 + h * np.einsum("mkn,kn->mn", Q, powers)


def solve_batch(rhs, y0, horizon, rtol=1e-10, atol=1e-10, event=None,
                terminal=True, event_width=1e-10, clamp=None, reject=None,
                check=None, pole_exit=None, graze=None, record=False, h0=1e-4,
                max_sweeps=200000):
    """Integrate ``y' = rhs(t, y)`` from ``t = 0`` for every column of ``y0``.

    Parameters
    ----------
    rhs : callable
        ``rhs(t, y)`` with ``t`` of shape ``(n,)`` and ``y`` of shape ``(m, n)``.
    horizon : float or array
        Final time per lane.
    event : callable, optional
        ``event(y) -> g``; the first upward zero crossing of ``g`` is located
        on the dense output to width ``event_width`` in ``t``.
    terminal : bool
        Stop a lane at its event (status ``EXITED``) or record the time and
        continue.
    clamp : callable, optional
        ``clamp(t, y, f) -> hmax`` per lane, an extra step-size bound.
    reject : callable, optional
        ``reject(y_new) -> mask`` of proposed states to refuse (step halved).
    check : callable, optional
        ``check(y) -> mask`` of accepted states that violate an invariant;
        those lanes are marked ``FAILED``.
    pole_exit : callable, optional
        ``pole_exit(y) -> mask`` of states where a step-size underflow means
        the solution reached a finite-time singularity at the event surface.
        Such lanes get ``event_time = t`` instead of failing.
    graze : callable, optional
        ``graze(y) -> mask`` of accepted states that count as having met the
        event surface even though ``g`` stayed negative.  With ``terminal``
        those lanes stop as ``EXITED`` at the current time.
    """
    y = np.array(y0, dtype=complex)
    m, n = y.shape
    horizon = np.broadcast_to(np.asarray(horizon, dtype=float), (n,)).copy()
    t = np.zeros(n)
    h = np.full(n, float(h0))
    status = np.full(n, ALIVE, dtype=np.int8)
    event_time = np.full(n, np.nan)
    nsteps = np.zeros(n, dtype=np.int64)
    messages = {}
    done = horizon <= 0
    f = rhs(t, y)
    samples = [(np.arange(n), t.copy(), y.copy())] if record else None
    if event is not None:
        g0 = event(y)
        started = g0 >= 0
        if np.any(started):
            event_time[started] = 0.0
            if terminal:
                status[started] = EXITED
                done |= started

    for _ in range(max_sweeps):
        act = np.nonzero(~done)[0]
        if act.size == 0:
            break
        ta, ya, fa = t[act], y[:, act], f[:, act]
        remaining = horizon[act] - ta
        ha = np.minimum(h[act], remaining)
        if clamp is not None:
            ha = np.minimum(ha, clamp(ta, ya, fa))
        K = np.empty((_NSTAGE + 1, m, act.size), dtype=complex)
        K[0] = fa
        for s in range(1, _NSTAGE):
            dy = np.einsum("s,smn->mn", _A[s, :s], K[:s]) * ha
            K[s] = rhs(ta + _C[s] * ha, ya + dy)
        y_new = ya + ha * np.einsum("s,smn->mn", _B, K[:_NSTAGE])
        last = ha == remaining
        t_new = np.where(last, horizon[act], ta + ha)
        f_new = rhs(t_new, y_new)
        K[_NSTAGE] = f_new
        err_vec = ha * np.einsum("s,smn->mn", _E, K)
        scale = atol + rtol * np.maximum(np.abs(ya), np.abs(y_new))
        with np.errstate(invalid="ignore", over="ignore"):
            err = np.sqrt(np.mean((np.abs(err_vec) / scale) ** 2, axis=0))
        finite = np.isfinite(err) & np.all(np.isfinite(y_new), axis=0) & np.all(np.isfinite(f_new), axis=0)
        bad = ~finite
        if reject is not None:
            bad |= reject(y_new)
        accept = (err <= 1.0) & ~bad

        with np.errstate(divide="ignore", invalid="ignore"):
            factor = np.where(err == 0, _MAX_FACTOR, _SAFETY * err ** -0.2)
        factor = np.where(accept, np.clip(factor, _MIN_FACTOR, _MAX_FACTOR),
                          np.clip(factor, _MIN_FACTOR, 1.0))
        factor = np.where(bad, 0.5, factor)
        h_next = ha * factor

        underflow = ~accept & (ha < 64 * np.finfo(float).eps * np.maximum(1.0, np.abs(ta)))
        if np.any(underflow):
            lanes = act[underflow]
            if pole_exit is not None:
                hit = pole_exit(ya[:, underflow]) & np.isnan(event_time[lanes])
                event_time[lanes[hit]] = t[lanes[hit]]
                if terminal:
                    status[lanes[hit]] = EXITED
                    done[lanes[hit]] = True
                    lanes = lanes[~hit]
            status[lanes] = FAILED
            done[lanes] = True
            for lane in lanes:
                messages[int(lane)] = f"step-size underflow at t={t[lane]!r}"

        acc = np.nonzero(accept)[0]
        if acc.size:
            lanes = act[acc]
            yn, fn, tn = y_new[:, acc], f_new[:, acc], t_new[acc]
            if event is not None:
                g_old, g_new = event(ya[:, acc]), event(yn)
                cross = (g_old < 0) & (g_new >= 0) & np.isnan(event_time[lanes])
                if np.any(cross):
                    ci = np.nonzero(cross)[0]
                    y0c, Kc, hc = ya[:, acc[ci]], K[:, :, acc[ci]], ha[acc[ci]]
                    lo, hi = np.zeros(ci.size), np.ones(ci.size)
                    for _ in range(_EVENT_ITERS):
                        if np.all((hi - lo) * hc <= event_width):
                            break
                        mid = 0.5 * (lo + hi)
                        above = event(_dense(y0c, Kc, hc, mid)) >= 0
                        hi = np.where(above, mid, hi)
                        lo = np.where(above, lo, mid)
                    te = ta[acc[ci]] + hi * hc
                    event_time[lanes[ci]] = te
                    if terminal:
                        ye = _dense(y0c, Kc, hc, hi)
                        yn[:, ci] = ye
                        fn[:, ci] = rhs(te, ye)
                        tn[ci] = te
                        status[lanes[ci]] = EXITED
                        done[lanes[ci]] = True
            t[lanes], y[:, lanes], f[:, lanes] = tn, yn, fn
            nsteps[lanes] += 1
            if graze is not None and terminal:
                hit = graze(yn) & (status[lanes] == ALIVE) & np.isnan(event_time[lanes])
                event_time[lanes[hit]] = tn[hit]
                status[lanes[hit]] = EXITED
                done[lanes[hit]] = True
            if check is not None:
                broken = check(yn) & (status[lanes] != FAILED)
                if np.any(broken):
                    for lane in lanes[broken]:
                        messages[int(lane)] = f"invariant violated at t={t[lane]!r}"
                    status[lanes[broken]] = FAILED
                    done[lanes[broken]] = True
            reached = t[lanes] >= horizon[lanes]
            done[lanes[reached]] = True
            if record:
                samples.append((lanes.copy(), t[lanes].copy(), y[:, lanes].copy()))
            # a step shortened to hit the horizon should not shrink the next one
            h_next[acc] = np.where(last[acc], np.maximum(h_next[acc], h[act][acc]), h_next[acc])
        h[act] = h_next
    else:
        for lane in np.nonzero(~done)[0]:
            status[lane] = FAILED
            messages[int(lane)] = "sweep limit reached"

    return BatchResult(t=t, y=y, status=status, event_time=event_time,
                       nsteps=nsteps, messages=messages, samples=samples)
