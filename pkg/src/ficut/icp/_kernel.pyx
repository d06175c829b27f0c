# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled branch-and-prune kernel.

Operation-for-operation port of ``_kernel_py``: same evaluation order,
same slack, same split rule, hence identical results.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, INFINITY, pow
from libc.stdlib cimport malloc, realloc, free

cdef double REL = 1e-12

cdef inline double dmin4(double a, double b, double c, double d) nogil:
    cdef double m = a
    if b < m: m = b
    if c < m: m = c
    if d < m: m = d
    return m

cdef inline double dmax4(double a, double b, double c, double d) nogil:
    cdef double m = a
    if b > m: m = b
    if c > m: m = c
    if d > m: m = d
    return m

cdef inline double mul0(double a, double b) nogil:
    if a == 0.0 or b == 0.0:
        return 0.0
    return a * b

cdef void eval_tape_c(const int[:] op, const int[:] a, const int[:] b, const double[:] val,
                      const double* lo, const double* hi, double* slo, double* shi) nogil:
    cdef Py_ssize_t n = op.shape[0]
    cdef Py_ssize_t i
    cdef int o, e, k
    cdef double l, h, al, ah, bl, bh, rl, rh, p1, p2, p3, p4, pl, ph
    for i in range(n):
        o = op[i]
        if o == 0:
            slo[i] = val[i]
            shi[i] = val[i]
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
            al = slo[a[i]]
            ah = shi[a[i]]
            bl = slo[b[i]]
            bh = shi[b[i]]
            if o == 6:
                if bl <= 0.0 and 0.0 <= bh:
                    slo[i] = -INFINITY
                    shi[i] = INFINITY
                    continue
                rl = 1.0 / bh
                rh = 1.0 / bl
                bl = rl - fabs(rl) * REL
                bh = rh + fabs(rh) * REL
            p1 = mul0(al, bl)
            p2 = mul0(al, bh)
            p3 = mul0(ah, bl)
            p4 = mul0(ah, bh)
            l = dmin4(p1, p2, p3, p4)
            h = dmax4(p1, p2, p3, p4)
        elif o == 7:
            e = b[i]
            al = slo[a[i]]
            ah = shi[a[i]]
            if e == 0:
                slo[i] = 1.0
                shi[i] = 1.0
                continue
            if e == 1:
                slo[i] = al
                shi[i] = ah
                continue
            pl = pow(al, e)
            ph = pow(ah, e)
            if e % 2 == 1 or al >= 0.0:
                l = pl
                h = ph
            elif ah <= 0.0:
                l = ph
                h = pl
            else:
                l = 0.0
                h = pl if pl > ph else ph
        else:
            al = slo[a[i]]
            ah = shi[a[i]]
            if al < 0.0:
                slo[i] = 0.0
                shi[i] = INFINITY
                continue
            l = sqrt(al)
            h = sqrt(ah)
        if l != l or h != h:
            slo[i] = -INFINITY
            shi[i] = INFINITY
        else:
            slo[i] = l - fabs(l) * REL
            shi[i] = h + fabs(h) * REL


def eval_tape(op, a, b, val, outs, lo, hi):
    cdef int[:] op_ = np.ascontiguousarray(op, dtype=np.int32)
    cdef int[:] a_ = np.ascontiguousarray(a, dtype=np.int32)
    cdef int[:] b_ = np.ascontiguousarray(b, dtype=np.int32)
    cdef double[:] val_ = np.ascontiguousarray(val, dtype=np.float64)
    cdef double[:] lo_ = np.ascontiguousarray(lo, dtype=np.float64)
    cdef double[:] hi_ = np.ascontiguousarray(hi, dtype=np.float64)
    n = op_.shape[0]
    cdef double[:] slo = np.zeros(max(n, 1))
    cdef double[:] shi = np.zeros(max(n, 1))
    if n:
        eval_tape_c(op_, a_, b_, val_, &lo_[0] if lo_.shape[0] else NULL,
                    &hi_[0] if hi_.shape[0] else NULL, &slo[0], &shi[0])
    return [slo[k] for k in outs], [shi[k] for k in outs]


cdef bint quad_prune(int j, int rel, const double* lo, const double* hi,
                     const int[:] qflag, const double[:] qlam, const int[:] qvp, const int[:] qv,
                     const int[:] qtp, const int[:] qdeg, const double[:] qK) nogil:
    cdef double s2max = 0.0, s2min = 0.0, l, h, m, smax, hval
    cdef int t, k
    if not qflag[j]:
        return False
    for t in range(qvp[j], qvp[j + 1]):
        k = qv[t]
        l = lo[k]
        h = hi[k]
        m = l * l
        if h * h > m:
            m = h * h
        s2max += m
        if l > 0.0:
            s2min += l * l
        elif h < 0.0:
            s2min += h * h
    smax = sqrt(s2max) * (1.0 + 1e-12)
    hval = qlam[j]
    for t in range(qtp[j], qtp[j + 1]):
        hval -= qK[t] * pow(smax, qdeg[t] - 2)
    if hval <= 0.0:
        return False
    if rel == 1:
        return True
    return s2min > 0.0


cdef void mean_value(double fl, double fh, int t0, int t1, const int[:] gvar, const int[:] gout,
                     const double* glo, const double* ghi, const double* lo, const double* hi,
                     const double* mid, double* outl, double* outh) nogil:
    cdef double l = fl, h = fh, mag = fabs(fl) + fabs(fh)
    cdef double gl, gh, dl, dh, p1, p2, p3, p4, ml, mh
    cdef int t, k
    for t in range(t0, t1):
        k = gvar[t]
        gl = glo[gout[t]]
        gh = ghi[gout[t]]
        dl = lo[k] - mid[k]
        dh = hi[k] - mid[k]
        dl -= fabs(dl) * REL
        dh += fabs(dh) * REL
        p1 = mul0(gl, dl)
        p2 = mul0(gl, dh)
        p3 = mul0(gh, dl)
        p4 = mul0(gh, dh)
        ml = dmin4(p1, p2, p3, p4)
        mh = dmax4(p1, p2, p3, p4)
        l += ml
        h += mh
        mag += fabs(ml) + fabs(mh)
    if l != l or h != h:
        outl[0] = -INFINITY
        outh[0] = INFINITY
        return
    outl[0] = l - mag * REL
    outh[0] = h + mag * REL


def _i32(x):
    x = np.asarray(x, dtype=np.int32).reshape(-1)
    return np.ascontiguousarray(x if x.shape[0] else np.zeros(1, np.int32))


def solve(op, a, b, val, outs, rels, qflag, qlam, qvp, qv, qtp, qdeg, qK,
          lo0, hi0, double delta, long max_boxes, gop=(), ga=(), gb=(), gval=(), gptr=None,
          gvar=(), gout=()):
    cdef int[:] op_ = np.ascontiguousarray(op, dtype=np.int32)
    cdef int[:] a_ = np.ascontiguousarray(a, dtype=np.int32)
    cdef int[:] b_ = np.ascontiguousarray(b, dtype=np.int32)
    cdef double[:] val_ = np.ascontiguousarray(val, dtype=np.float64)
    cdef int[:] outs_ = np.ascontiguousarray(outs, dtype=np.int32)
    cdef int[:] rels_ = np.ascontiguousarray(rels, dtype=np.int32)
    cdef int[:] qflag_ = np.ascontiguousarray(qflag, dtype=np.int32)
    cdef double[:] qlam_ = np.ascontiguousarray(qlam, dtype=np.float64)
    cdef int[:] qvp_ = np.ascontiguousarray(qvp, dtype=np.int32)
    cdef int[:] qv_ = np.ascontiguousarray(np.asarray(qv, dtype=np.int32).reshape(-1) if len(qv) else np.zeros(1, np.int32), dtype=np.int32)
    cdef int[:] qtp_ = np.ascontiguousarray(qtp, dtype=np.int32)
    cdef int[:] qdeg_ = np.ascontiguousarray(np.asarray(qdeg, dtype=np.int32) if len(qdeg) else np.zeros(1, np.int32), dtype=np.int32)
    cdef double[:] qK_ = np.ascontiguousarray(np.asarray(qK, dtype=np.float64) if len(qK) else np.zeros(1), dtype=np.float64)
    cdef int nv = len(lo0)
    cdef int nc = outs_.shape[0]
    cdef int[:] gop_ = _i32(gop)
    cdef int[:] ga_ = _i32(ga)
    cdef int[:] gb_ = _i32(gb)
    cdef double[:] gval_ = np.ascontiguousarray(np.asarray(gval, dtype=np.float64) if len(gval) else np.zeros(1))
    cdef int[:] gptr_ = _i32(gptr if gptr is not None else np.zeros(nc + 1, np.int32))
    cdef int[:] gvar_ = _i32(gvar)
    cdef int[:] gout_ = _i32(gout)
    cdef Py_ssize_t ng = len(gop)
    cdef double[:] glo = np.zeros(max(ng, 1))
    cdef double[:] ghi = np.zeros(max(ng, 1))
    cdef Py_ssize_t n = op_.shape[0]
    cdef double[:] slo = np.zeros(max(n, 1))
    cdef double[:] shi = np.zeros(max(n, 1))
    cdef double[:] mid = np.zeros(max(nv, 1))
    cdef double[:] mlo = np.zeros(max(n, 1))
    cdef double[:] mhi = np.zeros(max(n, 1))
    cdef bint have_mv
    cdef double ml, mh
    cdef Py_ssize_t rec = 2 * nv + 1  # lo[nv], hi[nv], depth
    cdef Py_ssize_t cap = 256
    cdef double* stack = <double*> malloc(cap * rec * sizeof(double))
    cdef Py_ssize_t top = 0
    cdef double* cur = <double*> malloc(rec * sizeof(double))
    cdef double* lo
    cdef double* hi
    cdef long boxes = 0
    cdef int max_depth = 0, depth, i, j, k, r
    cdef bint pruned, ok
    cdef double el, eh, w, d, m
    cdef int status = 0
    try:
        for i in range(nv):
            stack[i] = lo0[i]
            stack[nv + i] = hi0[i]
        stack[2 * nv] = 0
        top = 1
        lo = cur
        hi = cur + nv
        with nogil:
            while top > 0:
                top -= 1
                for i in range(rec):
                    cur[i] = stack[top * rec + i]
                depth = <int> cur[2 * nv]
                boxes += 1
                if depth > max_depth:
                    max_depth = depth
                if boxes > max_boxes:
                    boxes -= 1
                    status = 2
                    break
                if n:
                    eval_tape_c(op_, a_, b_, val_, lo, hi, &slo[0], &shi[0])
                pruned = False
                have_mv = False
                for i in range(nv):
                    mid[i] = 0.5 * (lo[i] + hi[i])
                for j in range(nc):
                    r = rels_[j]
                    el = slo[outs_[j]]
                    eh = shi[outs_[j]]
                    if gptr_[j] < gptr_[j + 1] and el <= 0.0 and 0.0 <= eh:
                        if not have_mv:
                            eval_tape_c(op_, a_, b_, val_, &mid[0], &mid[0], &mlo[0], &mhi[0])
                            eval_tape_c(gop_, ga_, gb_, gval_, lo, hi, &glo[0], &ghi[0])
                            have_mv = True
                        mean_value(mlo[outs_[j]], mhi[outs_[j]], gptr_[j], gptr_[j + 1], gvar_, gout_,
                                   &glo[0], &ghi[0], lo, hi, &mid[0], &ml, &mh)
                        if ml > el:
                            el = ml
                        if mh < eh:
                            eh = mh
                    if r == 0:
                        if el > 0.0:
                            pruned = True
                    elif r == 1:
                        if el >= 0.0:
                            pruned = True
                    else:
                        if el > 0.0 or eh < 0.0:
                            pruned = True
                    if not pruned and quad_prune(j, r, lo, hi, qflag_, qlam_, qvp_, qv_, qtp_, qdeg_, qK_):
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
                    if n:
                        eval_tape_c(op_, a_, b_, val_, &mid[0], &mid[0], &slo[0], &shi[0])
                    ok = True
                    for j in range(nc):
                        el = slo[outs_[j]]
                        eh = shi[outs_[j]]
                        if eh > delta:
                            ok = False
                            break
                        if rels_[j] == 2 and el < -delta:
                            ok = False
                            break
                    if ok:
                        status = 1
                        break
                m = 0.5 * (lo[k] + hi[k])
                if not (lo[k] < m and m < hi[k]):
                    continue
                if top + 2 > cap:
                    cap *= 2
                    stack = <double*> realloc(stack, cap * rec * sizeof(double))
                # right child first so the left child is explored next
                for i in range(rec):
                    stack[top * rec + i] = cur[i]
                stack[top * rec + k] = m
                stack[top * rec + 2 * nv] = depth + 1
                top += 1
                for i in range(rec):
                    stack[top * rec + i] = cur[i]
                stack[top * rec + nv + k] = m
                stack[top * rec + 2 * nv] = depth + 1
                top += 1
        if status == 0:
            return 0, [], [], boxes, max_depth
        return status, [cur[i] for i in range(nv)], [cur[nv + i] for i in range(nv)], boxes, max_depth
    finally:
        free(stack)
        free(cur)
