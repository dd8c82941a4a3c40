# cython: language_level=3, boundscheck=False, wraparound=False, initializedcheck=False
"""Compiled horizon loop.

Operation-for-operation transcription of ``core`` (policies) and
``env.reward_from_draws``; uniforms are consumed in the same order, so
results are bit-identical to ``_pykernel``.
"""
import numpy as np

from libc.math cimport exp, log, sqrt
from libc.stdlib cimport malloc, free


cdef struct Buf:
    const double* u
    Py_ssize_t n
    Py_ssize_t i
    int overflow


cdef inline double draw(Buf* b) noexcept nogil:
    if b.i >= b.n:
        b.overflow = 1
        return 0.0
    b.i += 1
    return b.u[b.i - 1]


cdef int argmax_tie(const double* v, int k, int* ties, Buf* b) noexcept nogil:
    cdef int i, nt = 0, idx
    cdef double best = v[0]
    for i in range(1, k):
        if v[i] > best:
            best = v[i]
    for i in range(k):
        if v[i] == best:
            ties[nt] = i
            nt += 1
    if nt == 1:
        return ties[0]
    idx = <int>(draw(b) * nt)
    if idx >= nt:
        idx = nt - 1
    return ties[idx]


cdef void softmax(const double* v, int k, double tau, double* p) noexcept nogil:
    cdef int i
    cdef double m = v[0], total = 0.0
    for i in range(k):
        if v[i] > m:
            m = v[i]
    for i in range(k):
        p[i] = exp((v[i] - m) / tau)
    for i in range(k):
        total += p[i]
    for i in range(k):
        p[i] = p[i] / total


cdef int sample_index(const double* p, int k, double u) noexcept nogil:
    cdef int i, last = 0
    cdef double cum = 0.0
    for i in range(k):
        if p[i] > 0.0:
            last = i
        cum += p[i]
        if u < cum:
            return i
    return last


cdef inline void welford(long* n, double* mean, double* m2, int arm, double r) noexcept nogil:
    cdef double delta
    n[arm] += 1
    if n[arm] == 1:
        mean[arm] = r
        m2[arm] = 0.0
        return
    delta = r - mean[arm]
    mean[arm] = mean[arm] + delta / <double>n[arm]
    m2[arm] = m2[arm] + delta * (r - mean[arm])


cdef inline double reward(int family, double mean, double sd, double a, double b) noexcept nogil:
    cdef double shape, d, s, x
    if family == 5:
        return 1.0 if a < mean else 0.0
    if family == 3:
        shape = mean * mean * mean / (sd * sd)
        d = mean * a * a
        if d == 0.0:
            x = mean
        else:
            s = sqrt(4.0 * shape * d + d * d)
            x = 4.0 * mean * shape * d / ((d + s) * (d + s))
        if b <= mean / (mean + x):
            return x
        return mean * mean / x
    return mean + sd * a


cdef int run(int algo, double p1, double p2, const double* means, int k, int family,
             double sd, const double* na, const double* nb, Py_ssize_t horizon,
             Buf* buf, double init_value, int unplayed_random,
             double* regret, unsigned char* optimal, long* counts) noexcept nogil:
    cdef double* est = <double*>malloc(k * sizeof(double))
    cdef double* m2 = <double*>malloc(k * sizeof(double))
    cdef double* probs = <double*>malloc(k * sizeof(double))
    cdef double* prefs = <double*>malloc(k * sizeof(double))
    cdef double* work = <double*>malloc(k * sizeof(double))
    cdef int* ties = <int*>malloc(k * sizeof(int))
    cdef Py_ssize_t t
    cdef int i, arm, nfresh, idx, greedy
    cdef long turn = 0
    cdef double best = means[0], u, r, rbar = 0.0, lt, v, var
    if est == NULL or m2 == NULL or probs == NULL or prefs == NULL or work == NULL or ties == NULL:
        free(est); free(m2); free(probs); free(prefs); free(work); free(ties)
        return -1
    for i in range(k):
        if means[i] > best:
            best = means[i]
        counts[i] = 0
        est[i] = init_value if algo < 4 else 0.0
        m2[i] = 0.0
        probs[i] = 1.0 / k
        prefs[i] = 0.0

    for t in range(horizon):
        # select
        if algo == 0:
            u = draw(buf)
            if u < p1:
                arm = <int>(draw(buf) * k)
                if arm >= k:
                    arm = k - 1
            else:
                arm = argmax_tie(est, k, ties, buf)
        elif algo == 1:
            softmax(est, k, p1, work)
            arm = sample_index(work, k, draw(buf))
        elif algo == 2:
            arm = sample_index(probs, k, draw(buf))
        elif algo == 3:
            softmax(prefs, k, 1.0, work)
            arm = sample_index(work, k, draw(buf))
        else:
            nfresh = 0
            for i in range(k):
                if counts[i] == 0:
                    ties[nfresh] = i
                    nfresh += 1
            if nfresh > 0:
                if unplayed_random == 0 or nfresh == 1:
                    arm = ties[0]
                else:
                    idx = <int>(draw(buf) * nfresh)
                    if idx >= nfresh:
                        idx = nfresh - 1
                    arm = ties[idx]
            else:
                lt = log(<double>turn)
                for i in range(k):
                    if algo == 4:
                        work[i] = est[i] + sqrt(2.0 * lt / <double>counts[i])
                    else:
                        var = m2[i] / <double>counts[i]
                        if not var > 0.0:
                            var = 0.0
                        v = var + sqrt(2.0 * lt / <double>counts[i])
                        work[i] = est[i] + sqrt(lt / <double>counts[i] * (0.25 if 0.25 <= v else v))
                arm = argmax_tie(work, k, ties, buf)

        r = reward(family, means[arm], sd, na[t], nb[t])

        # update
        welford(counts, est, m2, arm, r)
        turn += 1
        if algo == 2:
            greedy = argmax_tie(est, k, ties, buf)
            for i in range(k):
                if i == greedy:
                    probs[i] = probs[i] + p1 * (1.0 - probs[i])
                else:
                    probs[i] = probs[i] + p1 * (0.0 - probs[i])
        elif algo == 3:
            prefs[arm] = prefs[arm] + p2 * (r - rbar)
            rbar = (1.0 - p1) * rbar + p1 * r

        regret[t] = best - means[arm]
        optimal[t] = 1 if means[arm] == best else 0

    free(est); free(m2); free(probs); free(prefs); free(work); free(ties)
    return 0


def run_episode(int algo, double p1, double p2, double[::1] means, int family, double sd,
                double[::1] noise_a, double[::1] noise_b, double[::1] uniforms,
                double init_value=1.0, bint unplayed_random=False):
    """Play one horizon; returns ``(per_turn_regret, optimal_play, play_counts)``."""
    cdef Py_ssize_t horizon = noise_a.shape[0]
    cdef int k = means.shape[0]
    cdef int status
    cdef Buf buf
    if noise_b.shape[0] != horizon:
        raise ValueError("noise streams must have equal length")
    if k < 1:
        raise ValueError("a bandit needs at least one arm")
    regret = np.empty(horizon, dtype=np.float64)
    optimal = np.empty(horizon, dtype=np.uint8)
    counts = np.empty(k, dtype=np.int_)
    cdef double[::1] rv = regret
    cdef unsigned char[::1] ov = optimal
    cdef long[::1] cv = counts
    buf.u = &uniforms[0] if uniforms.shape[0] > 0 else NULL
    buf.n = uniforms.shape[0]
    buf.i = 0
    buf.overflow = 0
    with nogil:
        status = run(algo, p1, p2, &means[0], k, family, sd, &noise_a[0], &noise_b[0],
                     horizon, &buf, init_value, unplayed_random, &rv[0], &ov[0], &cv[0])
    if status != 0:
        raise MemoryError()
    if buf.overflow:
        raise IndexError("uniform buffer exhausted")
    return regret, optimal.astype(bool), counts
