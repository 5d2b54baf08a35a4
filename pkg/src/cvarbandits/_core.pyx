# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels.

Mirror of ``_pycore``: same draws, same operation order, same results.  The
extra ``simulate`` entry point runs one full replication of a built-in policy
without the GIL.
"""
import numpy as np

cimport numpy as cnp
from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport log, sqrt
from libc.stdlib cimport free, malloc
from libc.string cimport memmove
from numpy.random cimport bitgen_t
from numpy.random.c_distributions cimport (
    random_standard_exponential,
    random_standard_gamma,
    random_standard_normal,
    random_standard_uniform,
)

cnp.import_array()

NAME = "cython"

# policy codes shared with cvarbandits.policies
cdef enum:
    P_MCVTS = 0
    P_BCVTS = 1
    P_UUCB = 2
    P_CVARUCB = 3
    P_UNIFORM = 4

# arm kinds shared with cvarbandits.env
cdef enum:
    A_MULTINOMIAL = 0
    A_TGM = 1
    A_TRACE = 2

cdef enum:
    S_OK = 0
    S_TRACE_EXHAUSTED = 1
    S_OFF_SUPPORT = 2

STATUS_OK = S_OK
STATUS_TRACE_EXHAUSTED = S_TRACE_EXHAUSTED
STATUS_OFF_SUPPORT = S_OFF_SUPPORT


cdef bitgen_t* _bitgen(object gen) except NULL:
    return <bitgen_t*> PyCapsule_GetPointer(gen.bit_generator.capsule, "BitGenerator")


cdef inline double _cvar_sorted(const double* x, const double* p, Py_ssize_t n,
                                double alpha, double scale) noexcept nogil:
    cdef double cum = 0.0, comp = 0.0, acc = 0.0, m, y, t
    cdef Py_ssize_t i
    for i in range(n):
        m = p[i] / scale
        y = m - comp
        t = cum + y
        if t >= alpha or i == n - 1:
            return acc / alpha + ((alpha - cum) / alpha) * x[i]
        comp = (t - cum) - y
        cum = t
        acc += m * x[i]
    return 0.0


cdef inline double _cvar_uniform(const double* x, Py_ssize_t n, double alpha) noexcept nogil:
    cdef double m = 1.0 / n
    cdef double cum = 0.0, comp = 0.0, acc = 0.0, y, t
    cdef Py_ssize_t i
    for i in range(n):
        y = m - comp
        t = cum + y
        if t >= alpha or i == n - 1:
            return acc / alpha + ((alpha - cum) / alpha) * x[i]
        comp = (t - cum) - y
        cum = t
        acc += m * x[i]
    return 0.0


cdef inline double _cvar_optimistic(const double* x, Py_ssize_t n, double eps,
                                    double upper, double alpha) noexcept nogil:
    if eps >= 1.0:
        return upper
    cdef double w = 1.0 / n
    cdef double r = eps, cum = 0.0, comp = 0.0, acc = 0.0, m, y, t
    cdef Py_ssize_t i
    for i in range(n):
        m = w
        if r > 0.0:
            if r >= m:
                r -= m
                continue
            m = m - r
            r = 0.0
        y = m - comp
        t = cum + y
        if t >= alpha:
            return acc / alpha + ((alpha - cum) / alpha) * x[i]
        comp = (t - cum) - y
        cum = t
        acc += m * x[i]
    return acc / alpha + ((alpha - cum) / alpha) * upper


cdef inline double _mcvts_index(bitgen_t* bg, const double* support, const double* beta,
                                Py_ssize_t m, double alpha, double* scratch) noexcept nogil:
    cdef double s = 0.0, g
    cdef Py_ssize_t j
    for j in range(m):
        g = random_standard_gamma(bg, beta[j])
        scratch[j] = g
        s += g
    return _cvar_sorted(support, scratch, m, alpha, s)


cdef inline double _bcvts_index(bitgen_t* bg, const double* x, Py_ssize_t n,
                                double alpha, double* scratch) noexcept nogil:
    cdef double s = 0.0, e
    cdef Py_ssize_t i
    for i in range(n):
        e = random_standard_exponential(bg)
        scratch[i] = e
        s += e
    return _cvar_sorted(x, scratch, n, alpha, s)


cdef inline Py_ssize_t _argmax_tiebreak(bitgen_t* bg, const double* v, Py_ssize_t n) noexcept nogil:
    cdef double best = v[0]
    cdef Py_ssize_t nties = 1, k, pick, first = 0
    for k in range(1, n):
        if v[k] > best:
            best = v[k]
            nties = 1
            first = k
        elif v[k] == best:
            nties += 1
    if nties == 1:
        return first
    pick = <Py_ssize_t> (random_standard_uniform(bg) * nties)
    for k in range(n):
        if v[k] == best:
            if pick == 0:
                return k
            pick -= 1
    return first


cdef inline Py_ssize_t _search_cum(const double* cum, Py_ssize_t n, double u) noexcept nogil:
    cdef Py_ssize_t lo = 0, hi = n, mid
    while lo < hi:
        mid = (lo + hi) // 2
        if u < cum[mid]:
            hi = mid
        else:
            lo = mid + 1
    if lo == n:
        lo = n - 1
        while lo > 0 and cum[lo] == cum[lo - 1]:
            lo -= 1
    return lo


cdef inline double _sample_tgm(bitgen_t* bg, const double* means, const double* sds,
                               const double* cum, Py_ssize_t n, double bound) noexcept nogil:
    cdef Py_ssize_t j = _search_cum(cum, n, random_standard_uniform(bg))
    cdef double z = random_standard_normal(bg)
    cdef double v = means[j] + sds[j] * z
    if v < 0.0:
        v = 0.0
    if v > bound:
        v = bound
    return v


cdef inline Py_ssize_t _insert_sorted(double* buf, Py_ssize_t n, double v) noexcept nogil:
    # bisect_right, then shift the tail by one slot
    cdef Py_ssize_t lo = 0, hi = n, mid
    while lo < hi:
        mid = (lo + hi) // 2
        if v < buf[mid]:
            hi = mid
        else:
            lo = mid + 1
    if lo < n:
        memmove(&buf[lo + 1], &buf[lo], (n - lo) * sizeof(double))
    buf[lo] = v
    return lo


# ---------------------------------------------------------------------------
# Python-visible scalar kernels

def cvar_sorted(const double[::1] x, const double[::1] p, double alpha, double scale=1.0):
    if x.shape[0] == 0:
        raise ValueError("empty support")
    return _cvar_sorted(&x[0], &p[0], x.shape[0], alpha, scale)


def cvar_uniform(const double[::1] x, double alpha):
    if x.shape[0] == 0:
        raise ValueError("empty sample")
    return _cvar_uniform(&x[0], x.shape[0], alpha)


def cvar_optimistic(const double[::1] x, double eps, double upper, double alpha):
    if eps >= 1.0:
        return upper
    if x.shape[0] == 0:
        raise ValueError("empty sample")
    return _cvar_optimistic(&x[0], x.shape[0], eps, upper, alpha)


def dirichlet(object gen, const double[::1] beta):
    cdef bitgen_t* bg = _bitgen(gen)
    cdef Py_ssize_t n = beta.shape[0], j
    out = np.empty(n)
    cdef double[::1] w = out
    cdef double s = 0.0
    for j in range(n):
        w[j] = random_standard_gamma(bg, beta[j])
        s += w[j]
    for j in range(n):
        w[j] = w[j] / s
    return out


def uniform_simplex(object gen, Py_ssize_t n):
    cdef bitgen_t* bg = _bitgen(gen)
    cdef Py_ssize_t j
    out = np.empty(n)
    cdef double[::1] w = out
    cdef double s = 0.0
    for j in range(n):
        w[j] = random_standard_exponential(bg)
        s += w[j]
    for j in range(n):
        w[j] = w[j] / s
    return out


def mcvts_index(object gen, const double[::1] support, const double[::1] beta, double alpha):
    cdef bitgen_t* bg = _bitgen(gen)
    cdef Py_ssize_t m = support.shape[0]
    cdef double* scratch = <double*> malloc(m * sizeof(double))
    if scratch == NULL:
        raise MemoryError()
    try:
        return _mcvts_index(bg, &support[0], &beta[0], m, alpha, scratch)
    finally:
        free(scratch)


def bcvts_index(object gen, const double[::1] x, double alpha):
    cdef bitgen_t* bg = _bitgen(gen)
    cdef Py_ssize_t n = x.shape[0]
    cdef double* scratch = <double*> malloc(n * sizeof(double))
    if scratch == NULL:
        raise MemoryError()
    try:
        return _bcvts_index(bg, &x[0], n, alpha, scratch)
    finally:
        free(scratch)


def argmax_tiebreak(object gen, const double[::1] values):
    return _argmax_tiebreak(_bitgen(gen), &values[0], values.shape[0])


def search_cum(const double[::1] cum, double u):
    return _search_cum(&cum[0], cum.shape[0], u)


def sample_discrete_index(object gen, const double[::1] cum):
    return _search_cum(&cum[0], cum.shape[0], random_standard_uniform(_bitgen(gen)))


def sample_tgm(object gen, const double[::1] means, const double[::1] sds,
               const double[::1] cum, double bound):
    return _sample_tgm(_bitgen(gen), &means[0], &sds[0], &cum[0], means.shape[0], bound)


def dkw_radius(double t, double n):
    cdef double r = sqrt(log(2.0 * t * t) / (2.0 * n))
    return r if r < 1.0 else 1.0


def uucb_bonus(double t, double n, double alpha, double upper, double c):
    return upper / alpha * sqrt(c * log(t) / (2.0 * n))


# ---------------------------------------------------------------------------
# full replication

cdef struct ArmTable:
    Py_ssize_t K
    const int* kind
    const double* bound
    const Py_ssize_t* off
    const Py_ssize_t* length
    const double* vals
    const double* cum
    const double* sd
    const int* replace


cdef int _run(int policy, double alpha, double c_explore, double upper,
              const double* bcvts_bound,
              const double* sup_vals, const Py_ssize_t* sup_off, const Py_ssize_t* sup_len,
              ArmTable* arms, Py_ssize_t T,
              const Py_ssize_t* checkpoints, Py_ssize_t n_cp,
              bitgen_t* pbg, bitgen_t** abg,
              long long* counts_out, long long* n_clamped, Py_ssize_t* bad_arm) noexcept nogil:
    cdef Py_ssize_t K = arms.K
    cdef Py_ssize_t k, j, t, a, ci = 0, idx, cap = T + 1, max_m = 1
    cdef double r, tt, eps
    cdef int status = 0
    cdef double* idx_vals = <double*> malloc(K * sizeof(double))
    cdef long long* counts = <long long*> malloc(K * sizeof(long long))
    cdef Py_ssize_t* cursors = <Py_ssize_t*> malloc(K * sizeof(Py_ssize_t))
    cdef Py_ssize_t* nobs = <Py_ssize_t*> malloc(K * sizeof(Py_ssize_t))
    cdef double* emp = <double*> malloc(K * sizeof(double))
    cdef double* obs = NULL
    cdef double* beta = NULL
    cdef double* scratch = NULL

    if policy == P_MCVTS:
        for k in range(K):
            if sup_len[k] > max_m:
                max_m = sup_len[k]
        beta = <double*> malloc((sup_off[K - 1] + sup_len[K - 1]) * sizeof(double))
        for j in range(sup_off[K - 1] + sup_len[K - 1]):
            beta[j] = 1.0
        scratch = <double*> malloc(max_m * sizeof(double))
    elif policy != P_UNIFORM:
        obs = <double*> malloc(K * cap * sizeof(double))
        scratch = <double*> malloc(cap * sizeof(double))

    for k in range(K):
        counts[k] = 0
        cursors[k] = 0
        nobs[k] = 0
        emp[k] = 0.0
        if policy == P_BCVTS:
            obs[k * cap] = bcvts_bound[k]
            nobs[k] = 1

    for t in range(1, T + 1):
        # --- select
        if policy == P_UNIFORM:
            a = <Py_ssize_t> (random_standard_uniform(pbg) * K)
        elif (policy == P_UUCB or policy == P_CVARUCB) and t <= K:
            a = t - 1
        else:
            tt = <double> (t - 1)
            for k in range(K):
                if policy == P_MCVTS:
                    idx_vals[k] = _mcvts_index(pbg, &sup_vals[sup_off[k]], &beta[sup_off[k]],
                                               sup_len[k], alpha, scratch)
                elif policy == P_BCVTS:
                    idx_vals[k] = _bcvts_index(pbg, &obs[k * cap], nobs[k], alpha, scratch)
                elif policy == P_UUCB:
                    idx_vals[k] = emp[k] + upper / alpha * sqrt(c_explore * log(tt) / (2.0 * nobs[k]))
                else:
                    eps = sqrt(log(2.0 * tt * tt) / (2.0 * nobs[k]))
                    if eps > 1.0:
                        eps = 1.0
                    idx_vals[k] = _cvar_optimistic(&obs[k * cap], nobs[k], eps, upper, alpha)
            a = _argmax_tiebreak(pbg, idx_vals, K)

        # --- pull
        if arms.kind[a] == A_MULTINOMIAL:
            idx = _search_cum(&arms.cum[arms.off[a]], arms.length[a], random_standard_uniform(abg[a]))
            r = arms.vals[arms.off[a] + idx]
        elif arms.kind[a] == A_TGM:
            r = _sample_tgm(abg[a], &arms.vals[arms.off[a]], &arms.sd[arms.off[a]],
                            &arms.cum[arms.off[a]], arms.length[a], arms.bound[a])
        else:
            if arms.replace[a]:
                idx = <Py_ssize_t> (random_standard_uniform(abg[a]) * arms.length[a])
            else:
                if cursors[a] >= arms.length[a]:
                    status = S_TRACE_EXHAUSTED
                    bad_arm[0] = a
                    break
                idx = cursors[a]
                cursors[a] += 1
            r = arms.vals[arms.off[a] + idx]

        # --- update
        if policy == P_MCVTS:
            idx = _search_cum(&sup_vals[sup_off[a]], sup_len[a], r)
            # _search_cum returns the first value > r; the match sits just before it
            if idx > 0 and sup_vals[sup_off[a] + idx - 1] == r:
                beta[sup_off[a] + idx - 1] += 1.0
            elif sup_vals[sup_off[a] + idx] == r:
                beta[sup_off[a] + idx] += 1.0
            else:
                status = S_OFF_SUPPORT
                bad_arm[0] = a
                break
        elif policy != P_UNIFORM:
            tt = bcvts_bound[a] if policy == P_BCVTS else upper
            if r < 0.0:
                r = 0.0
                n_clamped[0] += 1
            elif r > tt:
                r = tt
                n_clamped[0] += 1
            _insert_sorted(&obs[a * cap], nobs[a], r)
            nobs[a] += 1
            if policy == P_UUCB:
                emp[a] = _cvar_uniform(&obs[a * cap], nobs[a], alpha)
        counts[a] += 1

        while ci < n_cp and checkpoints[ci] == t:
            for k in range(K):
                counts_out[ci * K + k] = counts[k]
            ci += 1

    free(idx_vals)
    free(counts)
    free(cursors)
    free(nobs)
    free(emp)
    free(obs)
    free(beta)
    free(scratch)
    return status


def simulate(int policy, double alpha, double c_explore, double upper,
             const double[::1] bcvts_bound,
             const double[::1] sup_vals, const Py_ssize_t[::1] sup_off, const Py_ssize_t[::1] sup_len,
             const int[::1] arm_kind, const double[::1] arm_bound,
             const Py_ssize_t[::1] arm_off, const Py_ssize_t[::1] arm_len,
             const double[::1] arm_vals, const double[::1] arm_cum, const double[::1] arm_sd,
             const int[::1] arm_replace,
             Py_ssize_t T, const Py_ssize_t[::1] checkpoints,
             object policy_gen, list arm_gens):
    """Play one replication; returns (counts at checkpoints, clamp count, status, bad arm)."""
    cdef Py_ssize_t K = arm_kind.shape[0], k
    cdef Py_ssize_t n_cp = checkpoints.shape[0]
    cdef ArmTable arms
    arms.K = K
    arms.kind = &arm_kind[0]
    arms.bound = &arm_bound[0]
    arms.off = &arm_off[0]
    arms.length = &arm_len[0]
    arms.vals = &arm_vals[0]
    arms.cum = &arm_cum[0]
    arms.sd = &arm_sd[0]
    arms.replace = &arm_replace[0]

    out = np.zeros((n_cp, K), dtype=np.int64)
    cdef long long[:, ::1] out_v = out
    cdef long long* out_p = &out_v[0, 0] if n_cp > 0 else NULL
    cdef long long n_clamped = 0
    cdef Py_ssize_t bad_arm = -1
    cdef int status
    cdef bitgen_t* pbg = _bitgen(policy_gen)
    cdef bitgen_t** abg = <bitgen_t**> malloc(K * sizeof(bitgen_t*))
    if abg == NULL:
        raise MemoryError()
    cdef const Py_ssize_t* cp_p = &checkpoints[0] if n_cp > 0 else NULL
    cdef const double* sv = &sup_vals[0] if sup_vals.shape[0] > 0 else NULL
    cdef const Py_ssize_t* so = &sup_off[0] if sup_off.shape[0] > 0 else NULL
    cdef const Py_ssize_t* sl = &sup_len[0] if sup_len.shape[0] > 0 else NULL
    cdef const double* bb = &bcvts_bound[0] if bcvts_bound.shape[0] > 0 else NULL
    try:
        for k in range(K):
            abg[k] = _bitgen(arm_gens[k])
        with nogil:
            status = _run(policy, alpha, c_explore, upper, bb, sv, so, sl, &arms, T,
                          cp_p, n_cp, pbg, abg, out_p, &n_clamped, &bad_arm)
    finally:
        free(abg)
    return out, n_clamped, status, bad_arm
