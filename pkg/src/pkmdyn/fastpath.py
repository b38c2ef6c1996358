"""Single-kernel evaluation of the second-order inverse dynamics.

The modular path (passes, per-limb caches, assemblies) pays Python dispatch
for every small kernel. Here the same sequence of compiled kernels runs
inside one compiled function over a padded, array-packed copy of the model.
The arithmetic is identical, so results agree with the modular path to
round-off; the test suite checks that.
"""

from __future__ import annotations

import weakref

import numpy as np
from numba import njit

from .limb_kinematics import (
    _delta_1,
    _delta_2,
    _delta_3,
    _fk,
    _gravity_terms,
    _jac_rate_1,
    _jac_rate_2,
    _jac_rate_3,
    _jacobian,
    _twist_1,
    _twist_2,
    _twist_3,
    _twist_4,
)
from .invdyn import _newton_euler_2nd
from .linalg import _lu_factor, _lu_solve_vec, _mm, _mtm, _mtv, _mv
from .model import PkmModel


class PackedModel:
    """Zero-padded arrays of a model, laid out for the fused kernel."""

    def __init__(self, model: PkmModel):
        L = model.n_limbs
        N = max(l.n_joints for l in model.limbs)
        dof = model.dof
        self.n_max = N
        self.nj = np.array([l.n_joints for l in model.limbs], dtype=np.int64)
        self.nt = np.array([l.n_tree for l in model.limbs], dtype=np.int64)
        self.screws = np.zeros((L, N, 6))
        self.refs = np.zeros((L, N, 4, 4))
        self.masses = np.zeros((L, N, 6, 6))
        self.rows = np.zeros((L, N), dtype=np.int64)
        self.D_t = np.zeros((L, N, dof))
        self.act = np.full(L, -1, dtype=np.int64)
        for k, l in enumerate(model.limbs):
            n = l.n_joints
            self.screws[k, :n] = l.screws
            self.refs[k, :n] = l.refs
            self.masses[k, : l.n_tree] = l.masses
            self.rows[k, :n] = l.task_rows
            self.D_t[k, :n] = l.D_t
            if l.actuated_joint is not None:
                self.act[k] = l.actuated_joint
        self.P_p = np.ascontiguousarray(model.P_p)
        self.gravity = np.ascontiguousarray(model.gravity)

    def pad_theta(self, parts) -> np.ndarray:
        out = np.zeros((len(parts), self.n_max))
        for k, p in enumerate(parts):
            out[k, : len(p)] = p
        return out


_packed: "weakref.WeakKeyDictionary[PkmModel, PackedModel]" = weakref.WeakKeyDictionary()


def packed(model: PkmModel) -> PackedModel:
    p = _packed.get(model)
    if p is None:
        p = _packed[model] = PackedModel(model)
    return p


@njit(cache=True)
def _solve_cols(LU, perm, B):
    out = np.empty(B.shape)
    for j in range(B.shape[1]):
        out[:, j] = _lu_solve_vec(LU, perm, np.ascontiguousarray(B[:, j]))
    return out


@njit(cache=True)
def _invdyn_kernel(nj, nt, screws, refs, masses, rows, D_all, act, P_p, gravity, theta, task, ext, printed, c4w):
    L = nj.shape[0]
    N = screws.shape[1]
    dof = P_p.shape[1]
    Vp = np.zeros((3, 6))
    for k in range(3):
        Vp[k] = _mv(P_p, task[k])
    a0 = -gravity
    zero6 = np.zeros(6)

    poses = np.zeros((L, N, 4, 4))
    rel = np.zeros((L, N, 4, 4))
    cpi = np.zeros((L, N, 4, 4))
    J = np.zeros((L, 6, N))
    Jr = np.zeros((L, 3, 6, N))
    tw = np.zeros((L, 4, N, 6))
    dl = np.zeros((L, 3, N, 6))
    rates = np.zeros((L, 4, N))
    corr = np.zeros((L, 3, 6))
    F = np.zeros((L, 3, N, dof))
    LUs = np.zeros((L, N, N))
    perms = np.zeros((L, N), dtype=np.int64)
    ratios = np.zeros(L)
    W = np.zeros((L, 3, N, 6))
    Q = np.zeros((L, 3, N))
    gaps = np.zeros(L)

    for l in range(L):
        n = nj[l]
        C, Cr = _fk(screws[l, :n], refs[l, :n], np.ascontiguousarray(theta[l, :n]))
        poses[l, :n] = C
        rel[l, :n] = Cr
    last = poses[L - 1, nj[L - 1] - 1]
    for l in range(L):
        gaps[l] = np.max(np.abs(poses[l, nj[l] - 1] - last))

    b = np.zeros((3, dof))
    n_a = 0
    for l in range(L):
        if act[l] >= 0:
            n_a += 1
    JIK = np.zeros((3, n_a, dof))
    row_ik = 0

    for l in range(L):
        n = nj[l]
        X = np.ascontiguousarray(screws[l, :n])
        C = poses[l, :n]
        Cr = rel[l, :n]
        r = rows[l, :n]
        D = np.ascontiguousarray(D_all[l, :n])
        Jl, Cpi = _jacobian(X, C)
        J[l, :, :n] = Jl
        cpi[l, :n] = Cpi
        Jt = np.empty((n, n))
        for i in range(n):
            Jt[i] = Jl[r[i]]
        LU, perm, ratio = _lu_factor(Jt)
        LUs[l, :n, :n] = LU
        perms[l, :n] = perm
        ratios[l] = ratio
        if not ratio > 0.0:
            continue
        Fl = _solve_cols(LU, perm, D)
        d1 = _mv(Fl, task[0])
        # pass 2
        V = _twist_1(Cr, X, d1)
        dV = _delta_1(Cpi, V, Vp[0])
        J1 = _jac_rate_1(Jl, dV)
        c2 = _mv(J1, d1)
        rhs = _mv(D, task[1])
        for i in range(n):
            rhs[i] -= c2[r[i]]
        d2 = _lu_solve_vec(LU, perm, rhs)
        # pass 3
        Vd = _twist_2(Cr, X, d1, d2, V, zero6)
        dVd = _delta_2(Cpi, Vd, Vp[0], Vp[1], dV)
        J2 = _jac_rate_2(Jl, dV, dVd)
        c3 = _mv(J2, d1) + 2.0 * _mv(J1, d2)
        rhs = _mv(D, task[2])
        for i in range(n):
            rhs[i] -= c3[r[i]]
        d3 = _lu_solve_vec(LU, perm, rhs)
        # pass 4
        Vdd = _twist_3(Cr, X, d1, d2, d3, V, Vd)
        dVdd = _delta_3(Cpi, Vdd, Vp[0], Vp[1], Vp[2], dV, dVd, printed)
        J3 = _jac_rate_3(Jl, dV, dVd, dVdd, printed)
        c4 = _mv(J3, d1) + c4w * _mv(J2, d2) + 3.0 * _mv(J1, d3)
        rhs = _mv(D, task[3])
        for i in range(n):
            rhs[i] -= c4[r[i]]
        d4 = _lu_solve_vec(LU, perm, rhs)
        # pass 5
        Vddd = _twist_4(Cr, X, d1, d2, d3, d4, V, Vd, Vdd)
        # F rates
        dJt = np.empty((n, n))
        ddJt = np.empty((n, n))
        for i in range(n):
            dJt[i] = J1[r[i]]
            ddJt[i] = J2[r[i]]
        Fd = -_solve_cols(LU, perm, _mm(dJt, Fl))
        Fdd = -_solve_cols(LU, perm, _mm(ddJt, Fl) + 2.0 * _mm(dJt, Fd))
        # dynamics of the tree
        G, Gd, Gdd = _gravity_terms(C, V, Vd, a0)
        m = nt[l]
        if l == L - 1:
            e0, e1, e2 = ext[0].copy(), ext[1].copy(), ext[2].copy()
        else:
            e0, e1, e2 = zero6, zero6, zero6
        Wl, Wd, Wdd, Ql, Qd, Qdd = _newton_euler_2nd(
            Cr, X, masses[l, :n], V, Vd, Vdd, Vd + G, Vdd + Gd, Vddd + Gdd, d1, d2, m, e0, e1, e2
        )
        Fb = Fl[:m]
        Fbd = Fd[:m]
        Fbdd = Fdd[:m]
        b[0] += _mtv(Fb, Ql)
        b[1] += _mtv(Fb, Qd) + _mtv(Fbd, Ql)
        b[2] += _mtv(Fb, Qdd) + 2.0 * _mtv(Fbd, Qd) + _mtv(Fbdd, Ql)
        if act[l] >= 0:
            j = act[l]
            JIK[0, row_ik] = Fl[j]
            JIK[1, row_ik] = Fd[j]
            JIK[2, row_ik] = Fdd[j]
            row_ik += 1
        # store
        Jr[l, 0, :, :n] = J1
        Jr[l, 1, :, :n] = J2
        Jr[l, 2, :, :n] = J3
        tw[l, 0, :n] = V
        tw[l, 1, :n] = Vd
        tw[l, 2, :n] = Vdd
        tw[l, 3, :n] = Vddd
        dl[l, 0, :n] = dV
        dl[l, 1, :n] = dVd
        dl[l, 2, :n] = dVdd
        rates[l, 0, :n] = d1
        rates[l, 1, :n] = d2
        rates[l, 2, :n] = d3
        rates[l, 3, :n] = d4
        corr[l, 0] = c2
        corr[l, 1] = c3
        corr[l, 2] = c4
        F[l, 0, :n] = Fl
        F[l, 1, :n] = Fd
        F[l, 2, :n] = Fdd
        W[l, 0, :m] = Wl
        W[l, 1, :m] = Wd
        W[l, 2, :m] = Wdd
        Q[l, 0, :m] = Ql
        Q[l, 1, :m] = Qd
        Q[l, 2, :m] = Qdd

    # actuator map
    u = np.zeros((3, n_a))
    for l in range(L):
        if not ratios[l] > 0.0:
            return (poses, rel, cpi, J, Jr, tw, dl, rates, corr, F, LUs, perms, ratios, W, Q, gaps, JIK, b, u, 0.0)
    J0 = np.ascontiguousarray(JIK[0])
    J1 = np.ascontiguousarray(JIK[1])
    J2 = np.ascontiguousarray(JIK[2])
    if n_a == dof:
        LU, perm, ratio_ik = _lu_factor(np.ascontiguousarray(J0.T))
        if ratio_ik > 0.0:
            u[0] = _lu_solve_vec(LU, perm, b[0].copy())
            u[1] = _lu_solve_vec(LU, perm, b[1] - _mtv(J1, u[0]))
            u[2] = _lu_solve_vec(LU, perm, b[2] - _mtv(J2, u[0]) - 2.0 * _mtv(J1, u[1]))
    else:
        Nm = _mtm(J0, J0)
        LU, perm, ratio_ik = _lu_factor(Nm)
        if ratio_ik > 0.0:
            Nd = _mtm(J1, J0) + _mtm(J0, J1)
            Ndd = _mtm(J2, J0) + 2.0 * _mtm(J1, J1) + _mtm(J0, J2)
            lam = _lu_solve_vec(LU, perm, b[0].copy())
            lam_d = _lu_solve_vec(LU, perm, b[1] - _mv(Nd, lam))
            lam_dd = _lu_solve_vec(LU, perm, b[2] - _mv(Ndd, lam) - 2.0 * _mv(Nd, lam_d))
            u[0] = _mv(J0, lam)
            u[1] = _mv(J1, lam) + _mv(J0, lam_d)
            u[2] = _mv(J2, lam) + 2.0 * _mv(J1, lam_d) + _mv(J0, lam_dd)
    return (poses, rel, cpi, J, Jr, tw, dl, rates, corr, F, LUs, perms, ratios, W, Q, gaps, JIK, b, u, ratio_ik)


def run_kernel(model: PkmModel, parts, task, ext=None, printed: bool = False, c4w: float = 3.0):
    pk = packed(model)
    task = np.ascontiguousarray(task, dtype=float)
    if task.shape != (4, model.dof):
        raise ValueError(f"task motion must have shape (4, {model.dof}), got {task.shape}")
    e = np.zeros((3, 6)) if ext is None else np.ascontiguousarray(ext, dtype=float)
    return _invdyn_kernel(
        pk.nj,
        pk.nt,
        pk.screws,
        pk.refs,
        pk.masses,
        pk.rows,
        pk.D_t,
        pk.act,
        pk.P_p,
        pk.gravity,
        pk.pad_theta(parts),
        task,
        e,
        printed,
        c4w,
    )
