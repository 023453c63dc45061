# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False, language_level=3
"""Compiled inner loops: splitting integrator for thermostated lattices and
the KMP event loop.  Mirrors ``_fallback`` operation for operation."""

from libc.math cimport exp, sqrt, log, cos, sin, isfinite
from libc.stdint cimport uint64_t, int64_t

cdef double TWO_PI = 6.283185307179586
cdef double INV53 = 1.0 / 9007199254740992.0

cdef enum:
    MODE_NONE = 0
    MODE_LANGEVIN = 1
    MODE_EXTENDED = 2
    MODE_NOSE_HOOVER = 3
    MODE_GAUSSIAN = 4


cdef inline uint64_t squares64(uint64_t ctr, uint64_t key) noexcept nogil:
    cdef uint64_t t, x, y, z
    y = ctr * key
    x = y
    z = y + key
    x = x * x + y
    x = (x >> 32) | (x << 32)
    x = x * x + z
    x = (x >> 32) | (x << 32)
    x = x * x + y
    x = (x >> 32) | (x << 32)
    t = x * x + z
    x = (t >> 32) | (t << 32)
    return t ^ ((x * x + y) >> 32)


cdef inline double gauss(uint64_t key, uint64_t ctr) noexcept nogil:
    cdef uint64_t a = squares64(2 * ctr, key)
    cdef uint64_t b = squares64(2 * ctr + 1, key)
    cdef double u1 = (<double>(a >> 11) + 1.0) * INV53
    cdef double u2 = <double>(b >> 11) * INV53
    return sqrt(-2.0 * log(u1)) * cos(TWO_PI * u2)


cdef inline double unif(uint64_t key, uint64_t ctr) noexcept nogil:
    return <double>(squares64(ctr, key) >> 11) * INV53


cdef void compute_forces(double[:, ::1] q, double[:, ::1] f, double[:, ::1] bf,
                         const int64_t[::1] bi, const int64_t[::1] bj,
                         double c2, double c4, double cj,
                         const double[::1] u2, const double[::1] u4) noexcept nogil:
    cdef Py_ssize_t n = q.shape[0], nu = q.shape[1], nb = bi.shape[0]
    cdef Py_ssize_t b, i, j, c
    cdef double r2, x, g, fc
    for i in range(n):
        for c in range(nu):
            f[i, c] = 0.0
    for b in range(nb):
        i = bi[b]
        j = bj[b]
        r2 = 0.0
        for c in range(nu):
            x = q[i, c] - (q[j, c] if j >= 0 else 0.0)
            r2 += x * x
        g = 2.0 * c2 + 4.0 * c4 * r2
        for c in range(nu):
            x = q[i, c] - (q[j, c] if j >= 0 else 0.0)
            fc = -g * x
            if cj != 0.0:
                fc -= cj * sin(x)
            bf[b, c] = fc
            f[i, c] += fc
            if j >= 0:
                f[j, c] -= fc
    for i in range(n):
        if u2[i] != 0.0 or u4[i] != 0.0:
            r2 = 0.0
            for c in range(nu):
                r2 += q[i, c] * q[i, c]
            g = 2.0 * u2[i] + 4.0 * u4[i] * r2
            for c in range(nu):
                f[i, c] -= g * q[i, c]


cdef double potential(double[:, ::1] q, const int64_t[::1] bi, const int64_t[::1] bj,
                      double c2, double c4, double cj,
                      const double[::1] u2, const double[::1] u4) noexcept nogil:
    cdef Py_ssize_t n = q.shape[0], nu = q.shape[1], nb = bi.shape[0]
    cdef Py_ssize_t b, i, j, c
    cdef double r2, x, e = 0.0
    for b in range(nb):
        i = bi[b]
        j = bj[b]
        r2 = 0.0
        for c in range(nu):
            x = q[i, c] - (q[j, c] if j >= 0 else 0.0)
            r2 += x * x
            if cj != 0.0:
                e += cj * (1.0 - cos(x))
        e += c2 * r2 + c4 * r2 * r2
    for i in range(n):
        r2 = 0.0
        for c in range(nu):
            r2 += q[i, c] * q[i, c]
        e += u2[i] * r2 + u4[i] * r2 * r2
    return e


cdef inline double group_kinetic(double[:, ::1] p, const int64_t[::1] group, int64_t g,
                                 double inv2m) noexcept nogil:
    cdef Py_ssize_t i, c
    cdef double k = 0.0
    for i in range(p.shape[0]):
        if group[i] == g:
            for c in range(p.shape[1]):
                k += p[i, c] * p[i, c]
    return k * inv2m


cdef inline void scale_group(double[:, ::1] p, const int64_t[::1] group, int64_t g,
                             double s) noexcept nogil:
    cdef Py_ssize_t i, c
    for i in range(p.shape[0]):
        if group[i] == g:
            for c in range(p.shape[1]):
                p[i, c] *= s


cdef inline void langevin_half(double[:, ::1] p, const double[::1] ou_c, const double[::1] ou_s,
                               const int64_t[::1] group, double[:, ::1] heat, Py_ssize_t s,
                               uint64_t key, uint64_t base, double inv2m) noexcept nogil:
    cdef Py_ssize_t n = p.shape[0], nu = p.shape[1], i, c
    cdef double old, new, dk
    for i in range(n):
        if ou_c[i] < 1.0 or ou_s[i] > 0.0:
            dk = 0.0
            for c in range(nu):
                old = p[i, c]
                new = ou_c[i] * old + ou_s[i] * gauss(key, base + <uint64_t>(i * nu + c))
                p[i, c] = new
                dk += (new * new - old * old) * inv2m
            if group[i] >= 0:
                heat[s, group[i]] -= dk


cdef inline void kick(double[:, ::1] p, double[:, ::1] f, double h) noexcept nogil:
    cdef Py_ssize_t i, c
    for i in range(p.shape[0]):
        for c in range(p.shape[1]):
            p[i, c] += h * f[i, c]


cdef inline double group_power(double[:, ::1] p, double[:, ::1] f, const int64_t[::1] group,
                               int64_t g) noexcept nogil:
    cdef Py_ssize_t i, c
    cdef double w = 0.0
    for i in range(p.shape[0]):
        if group[i] == g:
            for c in range(p.shape[1]):
                w += p[i, c] * f[i, c]
    return w


cdef inline int iso_kick(double[:, ::1] p, double[:, ::1] f, const int64_t[::1] group,
                         const double[::1] res, double[:, ::1] heat, Py_ssize_t s, double h,
                         double inv2m) noexcept nogil:
    # half kick followed by projection onto the isokinetic shell; the work the
    # forces would have done on the region (trapezoid in p) goes to the reservoir
    cdef int64_t g
    cdef double k, w0[2]
    for g in range(2):
        w0[g] = group_power(p, f, group, g)
    kick(p, f, h)
    for g in range(2):
        k = group_kinetic(p, group, g, inv2m)
        if not (k > 0.0):
            return -2
        scale_group(p, group, g, sqrt(res[g] / k))
        heat[s, g] += h * (w0[g] + group_power(p, f, group, g)) * inv2m
    return 0


cdef inline void nh_zeta(double[:, ::1] p, const int64_t[::1] group, const double[::1] res,
                         double[::1] aux, double h, double inv2m) noexcept nogil:
    # res = (theta, g_L, g_R, T_L, T_R)
    cdef int64_t g
    cdef double k
    for g in range(2):
        k = group_kinetic(p, group, g, inv2m)
        aux[g] += h / (res[0] * res[0]) * (2.0 * k / (res[1 + g] * res[3 + g]) - 1.0)


cdef inline void nh_scale(double[:, ::1] p, const int64_t[::1] group, double[::1] aux,
                          double h, double[:, ::1] heat, Py_ssize_t s, double inv2m) noexcept nogil:
    cdef int64_t g
    cdef double k0, sc
    for g in range(2):
        k0 = group_kinetic(p, group, g, inv2m)
        sc = exp(-aux[g] * h)
        scale_group(p, group, g, sc)
        heat[s, g] += k0 * (1.0 - sc * sc)


cdef inline void ext_kick(double[:, ::1] p, const double[::1] res, double[::1] aux, double h,
                          double[:, ::1] heat, Py_ssize_t s, double inv2m) noexcept nogil:
    # res = (lam_L, lam_R, gam_L, gam_R, T_L, T_R, site_L, site_R)
    cdef int64_t g
    cdef Py_ssize_t site
    cdef double old, new
    for g in range(2):
        site = <Py_ssize_t>res[6 + g]
        old = p[site, 0]
        new = old + h * aux[g]
        p[site, 0] = new
        heat[s, g] -= (new * new - old * old) * inv2m


cdef int run_steps(double[:, ::1] q, double[:, ::1] p, double[:, ::1] f, double[::1] aux,
                   const int64_t[::1] bond_i, const int64_t[::1] bond_j,
                   const int64_t[::1] bond_plane,
                   double c2, double c4, double cj, const double[::1] u2, const double[::1] u4,
                   const int64_t[::1] site_plane, double mass, int mode,
                   const double[::1] ou_c, const double[::1] ou_s, const int64_t[::1] group,
                   const double[::1] res, uint64_t key, int64_t step0, int64_t n_samples,
                   int64_t stride, double dt, bint average, double kin_norm,
                   double[:, ::1] flux_out, double[:, ::1] kin_out, double[:, ::1] heat_out,
                   double[::1] energy_out, double[:, ::1] bf, int64_t* done) noexcept nogil:
    cdef Py_ssize_t n = q.shape[0], nu = q.shape[1], nb = bond_i.shape[0]
    cdef Py_ssize_t s, k, b, i, j, c, pl
    cdef int64_t st = step0
    cdef uint64_t n_slots = <uint64_t>(2 * n * nu + 2)
    cdef uint64_t base
    cdef double h = 0.5 * dt, inv2m = 0.5 / mass, invm = 1.0 / mass
    cdef double ktot, lam2, e1, x
    cdef double favg = 1.0 / stride if average else 1.0
    cdef int status = 0
    for s in range(n_samples):
        for k in range(stride):
            base = <uint64_t>st * n_slots
            # thermostat, first half
            if mode == MODE_LANGEVIN:
                langevin_half(p, ou_c, ou_s, group, heat_out, s, key, base, inv2m)
            elif mode == MODE_NOSE_HOOVER:
                nh_zeta(p, group, res, aux, h, inv2m)
                nh_scale(p, group, aux, h, heat_out, s, inv2m)
            elif mode == MODE_EXTENDED:
                ext_kick(p, res, aux, h, heat_out, s, inv2m)
            # Hamiltonian velocity Verlet
            if mode == MODE_GAUSSIAN:
                status = iso_kick(p, f, group, res, heat_out, s, h, inv2m)
                if status != 0:
                    done[0] = st - step0
                    return status
            else:
                kick(p, f, h)
            for i in range(n):
                for c in range(nu):
                    q[i, c] += dt * invm * p[i, c]
            compute_forces(q, f, bf, bond_i, bond_j, c2, c4, cj, u2, u4)
            if mode == MODE_GAUSSIAN:
                status = iso_kick(p, f, group, res, heat_out, s, h, inv2m)
                if status != 0:
                    done[0] = st - step0
                    return status
            else:
                kick(p, f, h)
            # thermostat, second half
            if mode == MODE_LANGEVIN:
                langevin_half(p, ou_c, ou_s, group, heat_out, s, key,
                              base + <uint64_t>(n * nu), inv2m)
            elif mode == MODE_NOSE_HOOVER:
                nh_scale(p, group, aux, h, heat_out, s, inv2m)
                nh_zeta(p, group, res, aux, h, inv2m)
            elif mode == MODE_EXTENDED:
                ext_kick(p, res, aux, h, heat_out, s, inv2m)
                for b in range(2):
                    i = <Py_ssize_t>res[6 + b]
                    lam2 = res[b] * res[b]
                    e1 = exp(-res[2 + b] * dt)
                    aux[b] = lam2 * q[i, 0] + (aux[b] - lam2 * q[i, 0]) * e1 \
                        + sqrt(lam2 * res[4 + b] * (1.0 - e1 * e1)) \
                        * gauss(key, base + <uint64_t>(2 * n * nu + b))
            st += 1
            # observables
            if average or k == stride - 1:
                for b in range(nb):
                    pl = bond_plane[b]
                    if pl >= 0:
                        i = bond_i[b]
                        j = bond_j[b]
                        x = 0.0
                        for c in range(nu):
                            x -= bf[b, c] * (p[i, c] + p[j, c])
                        flux_out[s, pl] += favg * 0.5 * invm * x
                for i in range(n):
                    x = 0.0
                    for c in range(nu):
                        x += p[i, c] * p[i, c]
                    kin_out[s, site_plane[i]] += favg * kin_norm * x
        ktot = 0.0
        for i in range(n):
            for c in range(nu):
                ktot += p[i, c] * p[i, c]
        ktot *= inv2m
        if not isfinite(ktot):
            done[0] = st - step0
            return -1
        energy_out[s] = ktot + potential(q, bond_i, bond_j, c2, c4, cj, u2, u4)
    done[0] = st - step0
    return 0


def integrate(double[:, ::1] q, double[:, ::1] p, double[:, ::1] f, double[::1] aux,
              const int64_t[::1] bond_i, const int64_t[::1] bond_j, const int64_t[::1] bond_plane,
              double c2, double c4, double cj, const double[::1] u2, const double[::1] u4,
              const int64_t[::1] site_plane, double mass, int mode,
              const double[::1] ou_c, const double[::1] ou_s, const int64_t[::1] group,
              const double[::1] res, uint64_t key, int64_t step0, int64_t n_samples,
              int64_t stride, double dt, bint average, double kin_norm,
              double[:, ::1] flux_out, double[:, ::1] kin_out, double[:, ::1] heat_out,
              double[::1] energy_out, double[:, ::1] bf):
    """Advance ``n_samples * stride`` steps in place; ``f`` must hold the forces at ``q``.

    Returns ``(status, steps_done)`` with status 0 ok, -1 non-finite state,
    -2 singular isokinetic constraint.
    """
    cdef int64_t done = 0
    cdef int status
    with nogil:
        status = run_steps(q, p, f, aux, bond_i, bond_j, bond_plane, c2, c4, cj, u2, u4,
                           site_plane, mass, mode, ou_c, ou_s, group, res, key, step0,
                           n_samples, stride, dt, average, kin_norm, flux_out, kin_out,
                           heat_out, energy_out, bf, &done)
    return status, done


def forces_into(double[:, ::1] q, double[:, ::1] f, double[:, ::1] bf,
                const int64_t[::1] bond_i, const int64_t[::1] bond_j,
                double c2, double c4, double cj, const double[::1] u2, const double[::1] u4):
    with nogil:
        compute_forces(q, f, bf, bond_i, bond_j, c2, c4, cj, u2, u4)


def kmp_run(double[::1] e, double T_L, double T_R, double g_ex, double g_b,
            uint64_t key, int64_t event0, double t0, double window, int64_t n_windows,
            double[:, ::1] prof_out, double[:, ::1] bond_out, double[:, ::1] heat_out):
    """Event-driven KMP chain over ``n_windows`` windows of length ``window``.

    ``prof_out`` receives time integrals of the site energies per window,
    ``bond_out`` the energy moved left-to-right across each bond and
    ``heat_out`` the energy handed to the left/right reservoir.  Returns the
    number of executed events and the final clock.
    """
    cdef Py_ssize_t n = e.shape[0], i, w = 0
    cdef int64_t ev = event0
    cdef double t = t0, tau, x, s, u, old
    cdef double rate_pairs = (n - 1) * g_ex
    cdef double rate = rate_pairs + 2.0 * g_b
    cdef double w_end = t0 + window
    cdef uint64_t base
    with nogil:
        while w < n_windows:
            base = <uint64_t>ev * 3
            tau = -log(1.0 - unif(key, base)) / rate
            while t + tau >= w_end and w < n_windows:
                for i in range(n):
                    prof_out[w, i] += e[i] * (w_end - t)
                tau -= w_end - t
                t = w_end
                w += 1
                w_end = t0 + (w + 1) * window
            if w >= n_windows:
                break
            for i in range(n):
                prof_out[w, i] += e[i] * tau
            t += tau
            x = unif(key, base + 1) * rate
            u = unif(key, base + 2)
            if x < rate_pairs:
                i = <Py_ssize_t>(x / g_ex)
                if i > n - 2:
                    i = n - 2
                s = e[i] + e[i + 1]
                old = e[i]
                e[i] = u * s
                e[i + 1] = s - e[i]
                bond_out[w, i] += old - e[i]
            elif x - rate_pairs < g_b:
                old = e[0]
                e[0] = -T_L * log(1.0 - u)
                heat_out[w, 0] += old - e[0]
            else:
                old = e[n - 1]
                e[n - 1] = -T_R * log(1.0 - u)
                heat_out[w, 1] += old - e[n - 1]
            ev += 1
    return ev - event0, t
