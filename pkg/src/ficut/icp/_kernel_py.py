"""Pure-Python branch-and-prune kernel.

Mirrors ``_kernel.pyx`` operation for operation; the two must return
identical results on identical inputs.
"""
from __future__ import annotations

import math

REL = 1e-12
INF = math.inf

STATUS_UNSAT, STATUS_SAT, STATUS_BUDGET = 0, 1, 2
REL_LE, REL_LT, REL_EQ = 0, 1, 2


def _eval(op, a, b, val, lo, hi, slo, shi):
    n = len(op)
    for i in range(n):
        o = op[i]
        if o == 0:
            x = val[i]
            slo[i] = x
            shi[i] = x
            continue
        if o == 1:
            k = a[i]
            slo[i] = lo[k]
            shi[i] = hi[k]
            continue
        if o == 2:
            k = a[i]
            slo[i] = -shi[k]
            shi[i] = -slo[k]
            continue
        if o == 3:
            l = slo[a[i]] + slo[b[i]]
            h = shi[a[i]] + shi[b[i]]
        elif o == 4:
            l = slo[a[i]] - shi[b[i]]
            h = shi[a[i]] - slo[b[i]]
        elif o == 5 or o == 6:
            al, ah = slo[a[i]], shi[a[i]]
            bl, bh = slo[b[i]], shi[b[i]]
            if o == 6:
                if bl <= 0.0 <= bh:
                    slo[i] = -INF
                    shi[i] = INF
                    continue
                rl, rh = 1.0 / bh, 1.0 / bl
                bl = rl - abs(rl) * REL
                bh = rh + abs(rh) * REL
            p1 = 0.0 if (al == 0.0 or bl == 0.0) else al * bl
            p2 = 0.0 if (al == 0.0 or bh == 0.0) else al * bh
            p3 = 0.0 if (ah == 0.0 or bl == 0.0) else ah * bl
            p4 = 0.0 if (ah == 0.0 or bh == 0.0) else ah * bh
            l = min(p1, p2, p3, p4)
            h = max(p1, p2, p3, p4)
        elif o == 7:
            e = b[i]
            al, ah = slo[a[i]], shi[a[i]]
            if e == 0:
                slo[i] = 1.0
                shi[i] = 1.0
                continue
            if e == 1:
                slo[i] = al
                shi[i] = ah
                continue
            pl, ph = al ** e, ah ** e
            if e % 2 == 1 or al >= 0.0:
                l, h = pl, ph
            elif ah <= 0.0:
                l, h = ph, pl
            else:
                l, h = 0.0, max(pl, ph)
        else:  # sqrt
            al, ah = slo[a[i]], shi[a[i]]
            if al < 0.0:
                slo[i] = 0.0
                shi[i] = INF
                continue
            l, h = math.sqrt(al), math.sqrt(ah)
        if l != l or h != h:
            slo[i] = -INF
            shi[i] = INF
        else:
            slo[i] = l - abs(l) * REL
            shi[i] = h + abs(h) * REL


def eval_tape(op, a, b, val, outs, lo, hi):
    """Evaluate every output slot over the box; returns (lows, highs) lists."""
    op, a, b, val = list(op), list(a), list(b), list(val)
    n = len(op)
    slo = [0.0] * n
    shi = [0.0] * n
    _eval(op, a, b, val, list(lo), list(hi), slo, shi)
    return [slo[k] for k in outs], [shi[k] for k in outs]


def _quad_prune(j, rel, lo, hi, qflag, qlam, qvp, qv, qtp, qdeg, qK):
    if not qflag[j]:
        return False
    s2max = 0.0
    s2min = 0.0
    for t in range(qvp[j], qvp[j + 1]):
        k = qv[t]
        l, h = lo[k], hi[k]
        m = max(l * l, h * h)
        s2max += m
        if l > 0.0:
            s2min += l * l
        elif h < 0.0:
            s2min += h * h
    smax = math.sqrt(s2max) * (1.0 + 1e-12)
    hval = qlam[j]
    for t in range(qtp[j], qtp[j + 1]):
        hval -= qK[t] * smax ** (qdeg[t] - 2)
    if hval <= 0.0:
        return False
    if rel == REL_LT:
        return True
    return s2min > 0.0


def _mean_value(fl, fh, t0, t1, gvar, gout, glo, ghi, lo, hi, mid):
    """f(mid) + sum_k G_k * (X_k - mid_k), widened for rounding."""
    l, h, mag = fl, fh, abs(fl) + abs(fh)
    for t in range(t0, t1):
        k = gvar[t]
        gl, gh = glo[gout[t]], ghi[gout[t]]
        dl = lo[k] - mid[k]
        dh = hi[k] - mid[k]
        dl -= abs(dl) * REL
        dh += abs(dh) * REL
        p1 = 0.0 if (gl == 0.0 or dl == 0.0) else gl * dl
        p2 = 0.0 if (gl == 0.0 or dh == 0.0) else gl * dh
        p3 = 0.0 if (gh == 0.0 or dl == 0.0) else gh * dl
        p4 = 0.0 if (gh == 0.0 or dh == 0.0) else gh * dh
        ml = min(p1, p2, p3, p4)
        mh = max(p1, p2, p3, p4)
        l += ml
        h += mh
        mag += abs(ml) + abs(mh)
    if l != l or h != h:
        return -INF, INF
    return l - mag * REL, h + mag * REL


def solve(op, a, b, val, outs, rels, qflag, qlam, qvp, qv, qtp, qdeg, qK,
          lo0, hi0, delta, max_boxes, gop=(), ga=(), gb=(), gval=(), gptr=None, gvar=(), gout=()):
    """Depth-first branch and prune.

    The optional gradient tape (``gop``..``gval``) holds interval partial
    derivatives; entries ``gptr[j]:gptr[j+1]`` of ``gvar``/``gout`` give
    the variable and output slot of each partial of constraint j.  When
    the natural enclosure of a constraint does not prune a box, its
    mean-value enclosure is tried as well.

    Returns (status, witness_lo, witness_hi, boxes, max_depth).
    """
    op, a, b, val = list(op), list(a), list(b), list(val)
    gop, ga, gb, gval = list(gop), list(ga), list(gb), list(gval)
    gvar, gout = list(gvar), list(gout)
    gptr = list(gptr) if gptr is not None else [0] * (len(outs) + 1)
    ng = len(gop)
    glo = [0.0] * ng
    ghi = [0.0] * ng
    outs, rels = list(outs), list(rels)
    qflag, qlam, qvp, qv = list(qflag), list(qlam), list(qvp), list(qv)
    qtp, qdeg, qK = list(qtp), list(qdeg), list(qK)
    n = len(op)
    nv = len(lo0)
    nc = len(outs)
    slo = [0.0] * n
    shi = [0.0] * n
    mlo = [0.0] * n
    mhi = [0.0] * n
    stack = [(list(lo0), list(hi0), 0)]
    boxes = 0
    max_depth = 0
    while stack:
        lo, hi, depth = stack.pop()
        boxes += 1
        if depth > max_depth:
            max_depth = depth
        if boxes > max_boxes:
            return STATUS_BUDGET, lo, hi, boxes - 1, max_depth
        _eval(op, a, b, val, lo, hi, slo, shi)
        pruned = False
        have_mv = False
        mid = [0.5 * (lo[i] + hi[i]) for i in range(nv)]
        for j in range(nc):
            r = rels[j]
            el, eh = slo[outs[j]], shi[outs[j]]
            if gptr[j] < gptr[j + 1] and (el <= 0.0 <= eh):
                if not have_mv:
                    _eval(op, a, b, val, mid, mid, mlo, mhi)
                    _eval(gop, ga, gb, gval, lo, hi, glo, ghi)
                    have_mv = True
                ml, mh = _mean_value(mlo[outs[j]], mhi[outs[j]], gptr[j], gptr[j + 1],
                                     gvar, gout, glo, ghi, lo, hi, mid)
                if ml > el:
                    el = ml
                if mh < eh:
                    eh = mh
            if r == REL_LE:
                if el > 0.0:
                    pruned = True
            elif r == REL_LT:
                if el >= 0.0:
                    pruned = True
            else:
                if el > 0.0 or eh < 0.0:
                    pruned = True
            if not pruned and _quad_prune(j, r, lo, hi, qflag, qlam, qvp, qv, qtp, qdeg, qK):
                pruned = True
            if pruned:
                break
        if pruned:
            continue
        k = 0
        w = -1.0
        for i in range(nv):
            d = hi[i] - lo[i]
            if d > w:
                w = d
                k = i
        if w <= delta:
            _eval(op, a, b, val, mid, mid, slo, shi)
            ok = True
            for j in range(nc):
                el, eh = slo[outs[j]], shi[outs[j]]
                if eh > delta:
                    ok = False
                    break
                if rels[j] == REL_EQ and el < -delta:
                    ok = False
                    break
            if ok:
                return STATUS_SAT, lo, hi, boxes, max_depth
        m = 0.5 * (lo[k] + hi[k])
        if not (lo[k] < m < hi[k]):
            continue  # float resolution reached: the box is a point
        lo2 = lo[:]
        hi1 = hi[:]
        hi1[k] = m
        lo2[k] = m
        stack.append((lo2, hi, depth + 1))
        stack.append((lo, hi1, depth + 1))
    return STATUS_UNSAT, [], [], boxes, max_depth
