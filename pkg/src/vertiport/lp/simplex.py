"""Bounded-variable revised simplex.

Internal form: ``min c.z  s.t.  [A_eq 0 I; A_le I 0] z = b``, where the
middle block holds one slack per ``<=`` row and the last block one
artificial per equality row, fixed to ``[0, 0]``. A cold start uses the
slack/artificial identity basis; primal infeasibility of any starting basis
is removed by a composite phase 1 that minimises the sum of bound
violations of the basic variables. Warm starts that keep dual feasibility
(bound changes in branch-and-bound, right-hand-side changes) go through the
dual simplex instead.

The basis inverse is an ``splu`` factor plus a product-form eta file,
rebuilt every ``refactor_every`` pivots.
"""
from __future__ import annotations

import logging
import math

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .. import _kernels as K
from .model import Basis, LinearProgram, LPOptions, LPSolution, Status, farkas_gap

log = logging.getLogger(__name__)

_INF = np.inf


class _Simplex:
    def __init__(self, lp: LinearProgram, opts: LPOptions, warm: Basis | None = None):
        self.lp = lp
        self.opts = opts
        n, m_eq, m_le = lp.n, lp.m_eq, lp.m_le
        m = m_eq + m_le
        self.n, self.m_eq, self.m_le, self.m = n, m_eq, m_le, m

        A0 = sp.vstack([lp.A_eq, lp.A_le]).tocsr()
        b0 = np.concatenate([lp.b_eq, lp.b_le])
        if opts.scale and m:
            rmax = abs(A0).max(axis=1).toarray().ravel()
            rmax[rmax == 0] = 1.0
            R = 1.0 / rmax
        else:
            R = np.ones(m)
        cmax = float(np.max(np.abs(lp.c), initial=0.0))
        sigma = cmax if (opts.scale and cmax > 0) else 1.0
        self.R, self.sigma = R, sigma

        As = sp.diags(R) @ A0
        slack = sp.csr_matrix((np.ones(m_le), (np.arange(m_eq, m), np.arange(m_le))), shape=(m, m_le))
        art = sp.csr_matrix((np.ones(m_eq), (np.arange(m_eq), np.arange(m_eq))), shape=(m, m_eq))
        self.A = sp.hstack([As, slack, art]).tocsc()
        self.A.sort_indices()
        self.AT = self.A.T.tocsr()
        self.N = N = n + m_le + m_eq
        self.b = R * b0
        self.c = np.concatenate([lp.c / sigma, np.zeros(m_le + m_eq)])
        self.lo = np.concatenate([lp.lb, np.zeros(m_le + m_eq)])
        self.up = np.concatenate([lp.ub, np.full(m_le, _INF), np.zeros(m_eq)])
        norms = np.sqrt(np.asarray(self.A.multiply(self.A).sum(axis=0)).ravel())
        self.weight = 1.0 / np.maximum(norms, 1e-12)

        if opts.pricing_block:
            self.block = int(opts.pricing_block)
        else:
            nblk = max(1, N // 2000)
            self.block = int(math.ceil(N / nblk)) if N else 1
        self.nblocks = max(1, int(math.ceil(N / self.block))) if N else 1
        self.blk = 0

        self.iters = 0
        self.x = np.zeros(N)
        self.warm = False
        if warm is not None and (warm.n, warm.m_eq, warm.m_le) == (n, m_eq, m_le):
            self.basic = warm.basic.astype(np.int64).copy()
            self.status = warm.status.astype(np.int64).copy()
            self.warm = True
        else:
            self._cold_basis()
        self._settle_nonbasic()
        self.max_etas = max(1, opts.refactor_every)
        self.eta_rows = np.zeros(self.max_etas, dtype=np.int64)
        self.eta_cols = np.zeros((self.max_etas, m))
        self.n_etas = 0

    # -- basis bookkeeping -------------------------------------------------

    def _cold_basis(self):
        n, m_eq, m_le = self.n, self.m_eq, self.m_le
        basic = np.empty(self.m, dtype=np.int64)
        basic[:m_eq] = n + m_le + np.arange(m_eq)
        basic[m_eq:] = n + np.arange(m_le)
        self.basic = basic
        self.status = np.full(self.N, K.AT_LOWER, dtype=np.int64)
        self.status[basic] = K.BASIC

    def _settle_nonbasic(self):
        lo, up, st = self.lo, self.up, self.status
        nb = st != K.BASIC
        fixed = nb & (lo == up)
        st[fixed] = K.FIXED
        loose = nb & ~fixed
        flo = np.isfinite(lo)
        fup = np.isfinite(up)
        want_lo = loose & (st == K.AT_LOWER)
        want_up = loose & (st == K.AT_UPPER)
        other = loose & ~want_lo & ~want_up
        # keep the requested side when that bound exists, else fall back
        st[want_lo & ~flo & fup] = K.AT_UPPER
        st[want_lo & ~flo & ~fup] = K.FREE
        st[want_up & ~fup & flo] = K.AT_LOWER
        st[want_up & ~fup & ~flo] = K.FREE
        st[other & flo] = K.AT_LOWER
        st[other & ~flo & fup] = K.AT_UPPER
        st[other & ~flo & ~fup] = K.FREE
        x = self.x
        x[st == K.AT_LOWER] = lo[st == K.AT_LOWER]
        x[st == K.AT_UPPER] = up[st == K.AT_UPPER]
        x[st == K.FIXED] = lo[st == K.FIXED]
        x[st == K.FREE] = 0.0

    def _factor(self):
        B = self.A[:, self.basic]
        try:
            self.lu = splu(B.tocsc(), permc_spec="COLAMD")
        except RuntimeError:
            log.debug("singular basis at iteration %d; repairing", self.iters)
            self._repair()
            self.lu = splu(self.A[:, self.basic].tocsc(), permc_spec="COLAMD")
        self.n_etas = 0
        self._xb()

    def _repair(self):
        Bd = self.A[:, self.basic].toarray()
        _, Rm, piv = sla.qr(Bd, pivoting=True, mode="economic")
        dg = np.abs(np.diag(Rm))
        rank = int(np.sum(dg > 1e-9 * max(dg[0], 1.0))) if dg.size else 0
        keep = np.sort(piv[:rank])
        drop = np.setdiff1d(np.arange(self.m), keep)
        if rank:
            P, _, _ = sla.lu(Bd[:, keep])
            perm = np.argmax(P, axis=0)
            free_rows = perm[rank:]
        else:
            free_rows = np.arange(self.m)
        for pos, row in zip(drop, free_rows):
            old = self.basic[pos]
            unit = self.n + self.m_le + row if row < self.m_eq else self.n + (row - self.m_eq)
            self.status[old] = K.AT_LOWER
            self.basic[pos] = unit
            self.status[unit] = K.BASIC
        self._settle_nonbasic()

    def _xb(self):
        xt = self.x.copy()
        xt[self.basic] = 0.0
        rhs = self.b - self.A @ xt
        self.x[self.basic] = self.lu.solve(rhs)

    def _ftran(self, v):
        v = self.lu.solve(v)
        if self.n_etas:
            v = K.eta_ftran(v, self.eta_rows, self.eta_cols, self.n_etas)
        return v

    def _btran(self, v):
        v = np.array(v, dtype=float)
        if self.n_etas:
            v = K.eta_btran(v, self.eta_rows, self.eta_cols, self.n_etas)
        return self.lu.solve(v, trans="T")

    def _column(self, j):
        col = np.zeros(self.m)
        s, e = self.A.indptr[j], self.A.indptr[j + 1]
        col[self.A.indices[s:e]] = self.A.data[s:e]
        return col

    def _pivot(self, r, q, alpha, leave_status):
        p = self.basic[r]
        self.status[p] = leave_status
        if self.lo[p] == self.up[p]:
            self.status[p] = K.FIXED
        self.basic[r] = q
        self.status[q] = K.BASIC
        self.eta_rows[self.n_etas] = r
        self.eta_cols[self.n_etas, :] = alpha
        self.n_etas += 1
        if self.n_etas >= self.max_etas:
            self._factor()

    def _infeasibility(self):
        xb = self.x[self.basic]
        lob = self.lo[self.basic]
        upb = self.up[self.basic]
        tol = self.opts.feas_tol
        below = xb < lob - tol * (1.0 + np.abs(lob))
        above = xb > upb + tol * (1.0 + np.abs(upb))
        return below, above

    def _reduced_costs(self, cvec):
        y = self._btran(cvec[self.basic])
        d = cvec - self.AT @ y
        d[self.basic] = 0.0
        return y, d

    def _dual_feasible(self, d):
        tol = self.opts.opt_tol
        st = self.status
        bad = ((st == K.AT_LOWER) & (d < -tol)) | ((st == K.AT_UPPER) & (d > tol)) | ((st == K.FREE) & (np.abs(d) > tol))
        return not bad.any()

    # -- primal simplex ----------------------------------------------------

    def _primal(self):
        opts = self.opts
        fresh = False
        bland = False
        degen = 0
        while True:
            if self.iters >= opts.max_iters:
                return Status.ITERATION_LIMIT
            below, above = self._infeasibility()
            phase1 = bool(below.any() or above.any())
            if phase1:
                cvec = np.zeros(self.N)
                cvec[self.basic[below]] = -1.0
                cvec[self.basic[above]] = 1.0
            else:
                cvec = self.c
            y, d = self._reduced_costs(cvec)
            j, self.blk = K.price_primal(d, self.status, self.weight, opts.opt_tol,
                                         self.block, self.nblocks, self.blk, bland)
            if j < 0:
                if not fresh:
                    self._factor()
                    fresh = True
                    continue
                if phase1:
                    self.phase1_y = y
                    return Status.INFEASIBLE
                return Status.OPTIMAL
            alpha = self._ftran(self._column(j))
            dirn = 1.0 if d[j] < 0 else -1.0
            if self.status[j] == K.FREE:
                dirn = 1.0 if d[j] < 0 else -1.0
            flip = self.up[j] - self.lo[j]
            if not np.isfinite(flip) or self.status[j] == K.FREE:
                flip = _INF
            xb = self.x[self.basic]
            r, theta, to_up = K.ratio_primal(xb, alpha, self.lo[self.basic], self.up[self.basic], dirn,
                                             flip, opts.feas_tol, opts.pivot_tol, bland, self.basic)
            if r == -2:
                if phase1:
                    # cannot happen with exact arithmetic; rebuild and retry once
                    if not fresh:
                        self._factor()
                        fresh = True
                        continue
                    self.phase1_y = y
                    return Status.INFEASIBLE
                self.ray = (j, dirn, alpha)
                return Status.UNBOUNDED
            self.iters += 1
            fresh = False
            step = dirn * theta
            if step != 0.0:
                self.x[j] += step
                self.x[self.basic] -= step * alpha
            if abs(theta * d[j]) <= 1e-13 * (1.0 + abs(float(cvec @ self.x))):
                degen += 1
                if degen >= opts.stall_threshold:
                    bland = True
            else:
                degen = 0
                bland = False
            if r == -1:
                if self.status[j] == K.AT_LOWER:
                    self.status[j] = K.AT_UPPER
                    self.x[j] = self.up[j]
                else:
                    self.status[j] = K.AT_LOWER
                    self.x[j] = self.lo[j]
                continue
            p = self.basic[r]
            self.x[p] = self.up[p] if to_up else self.lo[p]
            self._pivot(r, j, alpha, K.AT_UPPER if to_up else K.AT_LOWER)

    # -- dual simplex ------------------------------------------------------

    def _dual(self):
        """Run dual simplex iterations from a dual-feasible basis.

        Returns ``"feasible"`` once the basis is primal feasible, ``"stall"``
        if it gives up (the caller falls back to the primal method), or
        ``Status.INFEASIBLE``.
        """
        opts = self.opts
        limit = self.iters + 4 * (self.m + self.N) + 100
        fresh = True
        while True:
            if self.iters >= opts.max_iters:
                return Status.ITERATION_LIMIT
            if self.iters >= limit:
                return "stall"
            xb = self.x[self.basic]
            lob = self.lo[self.basic]
            upb = self.up[self.basic]
            r = K.dual_leaving(xb, lob, upb, opts.feas_tol)
            if r < 0:
                return "feasible"
            _, d = self._reduced_costs(self.c)
            e = np.zeros(self.m)
            e[r] = 1.0
            rho = self._btran(e)
            arow = self.AT @ rho
            sgn = 1.0 if xb[r] < lob[r] else -1.0
            q = K.ratio_dual(d, arow, self.status, sgn, opts.opt_tol, opts.pivot_tol)
            if q < 0:
                if not fresh:
                    self._factor()
                    fresh = True
                    continue
                self.dual_ray = -sgn * rho
                return Status.INFEASIBLE
            alpha = self._ftran(self._column(q))
            if abs(alpha[r]) <= opts.pivot_tol:
                if not fresh:
                    self._factor()
                    fresh = True
                    continue
                return "stall"
            target = lob[r] if sgn > 0 else upb[r]
            theta = (xb[r] - target) / alpha[r]
            self.iters += 1
            fresh = False
            self.x[q] += theta
            self.x[self.basic] -= theta * alpha
            p = self.basic[r]
            self.x[p] = target
            self._pivot(r, q, alpha, K.AT_LOWER if sgn > 0 else K.AT_UPPER)

    # -- driver ------------------------------------------------------------

    def run(self) -> LPSolution:
        self._factor()
        status = None
        if self.warm:
            below, above = self._infeasibility()
            if below.any() or above.any():
                _, d = self._reduced_costs(self.c)
                if self._dual_feasible(d):
                    res = self._dual()
                    if res == Status.INFEASIBLE or res == Status.ITERATION_LIMIT:
                        status = res
        if status is None:
            status = self._primal()
        return self._solution(status)

    def _basis(self) -> Basis:
        return Basis(self.n, self.m_eq, self.m_le, self.basic.copy(), self.status.copy())

    def _solution(self, status) -> LPSolution:
        lp, n, m_eq = self.lp, self.n, self.m_eq
        x = self.x[:n].copy()
        cert = None
        if status == Status.INFEASIBLE:
            y = getattr(self, "dual_ray", None)
            if y is None:
                y = self.phase1_y
            y = self.R * y
            y_eq, y_le = y[:m_eq], y[m_eq:]
            cert = {"y_eq": y_eq, "y_le": y_le, "gap": farkas_gap(lp, y_eq, y_le)}
            return LPSolution(status, x, np.zeros(m_eq), np.zeros(self.m_le), np.zeros(n),
                              float("nan"), self.iters, self._basis(), cert,
                              "no point satisfies the constraints")
        yint, d = self._reduced_costs(self.c)
        y = self.sigma * self.R * yint
        y_eq = y[:m_eq]
        y_le = -y[m_eq:]
        rc = lp.c - lp.A_eq.T @ y_eq + lp.A_le.T @ y_le
        if status == Status.UNBOUNDED:
            j, dirn, alpha = self.ray
            ray = np.zeros(self.N)
            ray[j] = dirn
            ray[self.basic] = -dirn * alpha
            cert = {"ray": ray[:n]}
        msg = {
            Status.OPTIMAL: "optimal",
            Status.UNBOUNDED: "objective unbounded below",
            Status.ITERATION_LIMIT: "iteration limit reached",
        }[status]
        return LPSolution(status, x, y_eq, y_le, rc, float(lp.c @ x), self.iters,
                          self._basis(), cert, msg)


def _solve_rowless(lp: LinearProgram) -> LPSolution:
    c, lb, ub = lp.c, lp.lb, lp.ub
    x = np.where(c > 0, lb, np.where(c < 0, ub, np.where(np.isfinite(lb), lb, np.where(np.isfinite(ub), ub, 0.0))))
    empty = np.zeros(0)
    if not np.all(np.isfinite(x)):
        return LPSolution(Status.UNBOUNDED, np.nan_to_num(x), empty, empty, c.copy(), -np.inf,
                          message="objective unbounded below")
    return LPSolution(Status.OPTIMAL, x, empty, empty, c.copy(), float(c @ x), message="optimal")


def solve_lp(lp: LinearProgram, opts: LPOptions | None = None, warm: Basis | None = None) -> LPSolution:
    """Solve ``lp`` with the bounded-variable revised simplex method.

    ``warm`` is a :class:`Basis` from an earlier solve of a problem with the
    same shape; bounds, costs and right-hand sides may differ.
    """
    opts = opts or LPOptions()
    if lp.m_eq + lp.m_le == 0:
        return _solve_rowless(lp)
    return _Simplex(lp, opts, warm).run()
