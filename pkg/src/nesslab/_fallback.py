"""Pure-numpy twin of the compiled kernel (same signatures, same noise stream).

Results agree with the compiled path to rounding; summation order inside
the force accumulation differs, so long chaotic runs drift apart bitwise.
"""
from __future__ import annotations

import math

import numpy as np

from ._rng import normals, uniforms

MODE_NONE, MODE_LANGEVIN, MODE_EXTENDED, MODE_NOSE_HOOVER, MODE_GAUSSIAN = range(5)


def forces_into(q, f, bf, bond_i, bond_j, c2, c4, cj, u2, u4):
    q = np.asarray(q)
    inner = bond_j >= 0
    qj = np.where(inner[:, None], q[np.maximum(bond_j, 0)], 0.0)
    x = q[bond_i] - qj
    r2 = np.sum(x * x, axis=1, keepdims=True)
    fb = -(2.0 * c2 + 4.0 * c4 * r2) * x
    if cj != 0.0:
        fb = fb - cj * np.sin(x)
    bf[...] = fb
    out = np.zeros_like(q)
    np.add.at(out, bond_i, fb)
    np.add.at(out, bond_j[inner], -fb[inner])
    r2s = np.sum(q * q, axis=1, keepdims=True)
    out -= (2.0 * np.asarray(u2)[:, None] + 4.0 * np.asarray(u4)[:, None] * r2s) * q
    f[...] = out


def _potential(q, bond_i, bond_j, c2, c4, cj, u2, u4):
    inner = bond_j >= 0
    qj = np.where(inner[:, None], q[np.maximum(bond_j, 0)], 0.0)
    x = q[bond_i] - qj
    r2 = np.sum(x * x, axis=1)
    e = np.sum(c2 * r2 + c4 * r2 * r2)
    if cj != 0.0:
        e += cj * np.sum(1.0 - np.cos(x))
    r2s = np.sum(q * q, axis=1)
    return float(e + np.sum(u2 * r2s + u4 * r2s * r2s))


def integrate(q, p, f, aux, bond_i, bond_j, bond_plane, c2, c4, cj, u2, u4,
              site_plane, mass, mode, ou_c, ou_s, group, res, key, step0, n_samples,
              stride, dt, average, kin_norm, flux_out, kin_out, heat_out, energy_out, bf):
    n, nu = q.shape
    h = 0.5 * dt
    inv2m = 0.5 / mass
    n_slots = 2 * n * nu + 2
    u2 = np.asarray(u2)
    u4 = np.asarray(u4)
    group = np.asarray(group)
    res = np.asarray(res)
    ou_c = np.asarray(ou_c)
    ou_s = np.asarray(ou_s)
    masks = [group == 0, group == 1]
    thermo = (ou_c < 1.0) | (ou_s > 0.0)
    slot_idx = np.arange(n * nu, dtype=np.uint64).reshape(n, nu)
    planes = bond_plane >= 0
    pb_i, pb_j, pb_plane = bond_i[planes], bond_j[planes], bond_plane[planes]
    favg = 1.0 / stride if average else 1.0
    st = step0

    def group_k(g):
        return float(np.sum(p[masks[g]] ** 2)) * inv2m

    def langevin_half(s, base):
        z = normals(np.uint64(base) + slot_idx[thermo], key).reshape(-1, nu)
        old = p[thermo]
        new = ou_c[thermo, None] * old + ou_s[thermo, None] * z
        p[thermo] = new
        dk = np.sum(new * new - old * old, axis=1) * inv2m
        for g in (0, 1):
            heat_out[s, g] -= np.sum(dk[group[thermo] == g])

    def iso_kick(s):
        # half kick, projection onto the shell; trapezoidal force work goes to the reservoir
        w0 = [float(np.sum(p[masks[g]] * f[masks[g]])) for g in (0, 1)]
        p[...] += h * f
        for g in (0, 1):
            k = group_k(g)
            if not k > 0.0:
                return -2
            p[masks[g]] *= math.sqrt(res[g] / k)
            heat_out[s, g] += h * (w0[g] + float(np.sum(p[masks[g]] * f[masks[g]]))) * inv2m
        return 0

    def nh_zeta():
        for g in (0, 1):
            aux[g] += h / (res[0] * res[0]) * (2.0 * group_k(g) / (res[1 + g] * res[3 + g]) - 1.0)

    def nh_scale(s):
        for g in (0, 1):
            k0 = group_k(g)
            sc = math.exp(-aux[g] * h)
            p[masks[g]] *= sc
            heat_out[s, g] += k0 * (1.0 - sc * sc)

    def ext_kick(s):
        for g in (0, 1):
            site = int(res[6 + g])
            old = p[site, 0]
            new = old + h * aux[g]
            p[site, 0] = new
            heat_out[s, g] -= (new * new - old * old) * inv2m

    for s in range(n_samples):
        for k in range(stride):
            base = st * n_slots
            if mode == MODE_LANGEVIN:
                langevin_half(s, base)
            elif mode == MODE_NOSE_HOOVER:
                nh_zeta()
                nh_scale(s)
            elif mode == MODE_EXTENDED:
                ext_kick(s)
            if mode == MODE_GAUSSIAN:
                if iso_kick(s) != 0:
                    return -2, st - step0
            else:
                p += h * f
            q += dt * (1.0 / mass) * p
            forces_into(q, f, bf, bond_i, bond_j, c2, c4, cj, u2, u4)
            if mode == MODE_GAUSSIAN:
                if iso_kick(s) != 0:
                    return -2, st - step0
            else:
                p += h * f
            if mode == MODE_LANGEVIN:
                langevin_half(s, base + n * nu)
            elif mode == MODE_NOSE_HOOVER:
                nh_scale(s)
                nh_zeta()
            elif mode == MODE_EXTENDED:
                ext_kick(s)
                z = normals(np.array([base + 2 * n * nu, base + 2 * n * nu + 1], dtype=np.uint64), key)
                for b in (0, 1):
                    i = int(res[6 + b])
                    lam2 = res[b] * res[b]
                    e1 = math.exp(-res[2 + b] * dt)
                    aux[b] = lam2 * q[i, 0] + (aux[b] - lam2 * q[i, 0]) * e1 \
                        + math.sqrt(lam2 * res[4 + b] * (1.0 - e1 * e1)) * z[b]
            st += 1
            if average or k == stride - 1:
                x = -np.sum(bf[planes] * (p[pb_i] + p[pb_j]), axis=1)
                np.add.at(flux_out[s], pb_plane, favg * 0.5 / mass * x)
                np.add.at(kin_out[s], site_plane, favg * kin_norm * np.sum(p * p, axis=1))
        ktot = float(np.sum(p * p)) * inv2m
        if not math.isfinite(ktot):
            return -1, st - step0
        energy_out[s] = ktot + _potential(q, bond_i, bond_j, c2, c4, cj, u2, u4)
    return 0, st - step0


def kmp_run(e, T_L, T_R, g_ex, g_b, key, event0, t0, window, n_windows,
            prof_out, bond_out, heat_out):
    n = e.shape[0]
    rate_pairs = (n - 1) * g_ex
    rate = rate_pairs + 2.0 * g_b
    t = t0
    w = 0
    w_end = t0 + window
    ev = event0
    while w < n_windows:
        u0, x, u = uniforms(np.array([3 * ev, 3 * ev + 1, 3 * ev + 2], dtype=np.uint64), key)
        tau = -math.log(1.0 - u0) / rate
        while t + tau >= w_end and w < n_windows:
            prof_out[w] += e * (w_end - t)
            tau -= w_end - t
            t = w_end
            w += 1
            w_end = t0 + (w + 1) * window
        if w >= n_windows:
            break
        prof_out[w] += e * tau
        t += tau
        x *= rate
        if x < rate_pairs:
            i = min(int(x / g_ex), n - 2)
            s = e[i] + e[i + 1]
            old = e[i]
            e[i] = u * s
            e[i + 1] = s - e[i]
            bond_out[w, i] += old - e[i]
        elif x - rate_pairs < g_b:
            old = e[0]
            e[0] = -T_L * math.log(1.0 - u)
            heat_out[w, 0] += old - e[0]
        else:
            old = e[n - 1]
            e[n - 1] = -T_R * math.log(1.0 - u)
            heat_out[w, 1] += old - e[n - 1]
        ev += 1
    return ev - event0, t
