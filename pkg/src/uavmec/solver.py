"""Smooth convex inner solver: log-barrier Newton with backtracking.

Solves the convexified joint trajectory/resource step and the fixed-position
resource-allocation problem.  Every constraint is smooth on the strictly
feasible interior, so a plain barrier method with a x10 parameter schedule is
enough; problem dimensions stay below ~20.

Internally everything is scaled: positions in units of 100 m, CPU frequency
in GHz, bits through the configured queue scale, time in seconds (slots are
order one second).  Callers receive solutions in these solver units and map
them back to physical quantities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.optimize

__all__ = [
    "SolverFailure",
    "SolverOptions",
    "SolverReport",
    "JointStepSubproblem",
    "ResourceSubproblem",
    "solve_step",
    "solve_fixed_position",
    "kkt_residual",
    "POS_SCALE",
    "FREQ_SCALE",
]

POS_SCALE = 100.0   # meters per solver position unit
FREQ_SCALE = 1e9    # Hz per solver frequency unit


class SolverFailure(RuntimeError):
    """The inner solver lost feasibility or could not make progress."""


@dataclass
class SolverOptions:
    gap: float = 3e-8          # absolute duality-gap target (m / t_final)
    t0: float = 1.0
    mu: float = 20.0
    newton_tol: float = 1e-11  # half squared Newton decrement
    max_newton: int = 100      # Newton step cap per barrier stage
    armijo: float = 0.25
    backtrack: float = 0.5


@dataclass
class SolverReport:
    x: np.ndarray
    objective: float
    max_violation: float
    stationarity: float
    iterations: int
    status: str
    t_final: float = 0.0


# ---------------------------------------------------------------------------
# subproblem descriptions
# ---------------------------------------------------------------------------


@dataclass
class JointStepSubproblem:
    """Convexified joint step at a linearization point, in solver units.

    Variables are packed ``[f (m), d (m), s (m), p (2)?, y (1)?]`` where m is
    the number of users with positive backlog, ``s`` squared is the offloaded
    bit count in queue-scale units, ``p`` is the next UAV position, and ``y``
    under-estimates the propulsion induced-power root.  The position block is
    absent when kinematics pin the position; the ``y`` block is absent when
    the virtual energy backlog is zero (propulsion then has no weight).
    """

    m: int
    # objective
    c0: float
    f3: np.ndarray
    f1: np.ndarray
    d1: np.ndarray
    s1: np.ndarray
    v2: float = 0.0
    v3: float = 0.0
    ycoef: float = 0.0
    # resource constraints
    f_max: np.ndarray = None
    q: np.ndarray = None
    a_loc: np.ndarray = None
    delta_total: float = 1.0
    delta_floor: float = 1e-9
    # rate cone: s^2/d + beta*||p-p_ref||^2 - c_rate <= 0 (beta=0 when fixed)
    beta: np.ndarray = None
    c_rate: np.ndarray = None
    p_ref: np.ndarray = None   # (m, 2), only when position free
    # position block
    has_pos: bool = False
    p_u: np.ndarray = None
    p_F: np.ndarray = None
    r_speed: float = 0.0
    r_reach: float = 0.0
    # induced-power slack block
    has_y: bool = False
    c3: float = 0.0
    slack_a0: float = 0.0
    slack_ay: float = 0.0
    slack_ap: np.ndarray = None
    y_lo: float = 1e-3
    y_hi: float = 1e3

    def __post_init__(self):
        m = self.m
        self.sf = slice(0, m)
        self.sd = slice(m, 2 * m)
        self.ss = slice(2 * m, 3 * m)
        n = 3 * m
        if self.has_pos:
            self.sp = slice(n, n + 2)
            n += 2
        if self.has_y:
            self.iy = n
            n += 1
        self.nvar = n
        self.n_cons = 6 * m + 1 + (2 if self.has_pos else 0) + (3 if self.has_y else 0)
        # constraint row offsets
        self.i_simplex = 4 * m
        self.i_quota = 4 * m + 1
        self.i_rate = 5 * m + 1
        base = 6 * m + 1
        if self.has_pos:
            self.i_speed, self.i_reach = base, base + 1
            base += 2
        if self.has_y:
            self.i_slack, self.i_ylo, self.i_yhi = base, base + 1, base + 2
        # static Jacobian entries
        J = np.zeros((self.n_cons, n))
        idx = np.arange(m)
        J[idx, idx] = -1.0
        J[m + idx, idx] = 1.0
        J[2 * m + idx, m + idx] = -1.0
        J[3 * m + idx, 2 * m + idx] = -1.0
        J[self.i_simplex, self.sd] = 1.0
        J[self.i_quota + idx, idx] = self.a_loc
        if self.has_y:
            J[self.i_slack, self.sp] = -self.slack_ap
            J[self.i_slack, self.iy] = -self.slack_ay
            J[self.i_ylo, self.iy] = -1.0
            J[self.i_yhi, self.iy] = 1.0
        self._jac_template = J

    # -- objective -----------------------------------------------------

    def _pos_terms(self, x):
        r = x[self.sp] - self.p_u
        return r, float(np.linalg.norm(r))

    def objective(self, x) -> float:
        f, d, s = x[self.sf], x[self.sd], x[self.ss]
        val = self.c0 + float(self.f3 @ (f ** 3) + self.f1 @ f + self.d1 @ d + self.s1 @ s)
        if self.has_pos:
            r, nr = self._pos_terms(x)
            val += self.v2 * nr * nr + self.v3 * nr ** 3
        if self.has_y:
            val += self.ycoef * x[self.iy]
        return val

    def obj_grad(self, x) -> np.ndarray:
        g = np.zeros(self.nvar)
        f = x[self.sf]
        g[self.sf] = 3.0 * self.f3 * f * f + self.f1
        g[self.sd] = self.d1
        g[self.ss] = self.s1
        if self.has_pos:
            r, nr = self._pos_terms(x)
            g[self.sp] = 2.0 * self.v2 * r + 3.0 * self.v3 * nr * r
        if self.has_y:
            g[self.iy] = self.ycoef
        return g

    def obj_hess(self, x) -> np.ndarray:
        H = np.zeros((self.nvar, self.nvar))
        if self.m:
            idx = np.arange(self.m)
            H[idx, idx] = 6.0 * self.f3 * x[self.sf]
        if self.has_pos:
            r, nr = self._pos_terms(x)
            block = 2.0 * self.v2 * np.eye(2)
            if nr > 1e-14:
                block = block + 3.0 * self.v3 * (nr * np.eye(2) + np.outer(r, r) / nr)
            H[self.sp, self.sp] = block
        return H

    # -- constraints ----------------------------------------------------

    def cons(self, x) -> np.ndarray:
        m = self.m
        f, d, s = x[self.sf], x[self.sd], x[self.ss]
        out = np.empty(self.n_cons)
        out[0:m] = -f
        out[m:2 * m] = f - self.f_max
        out[2 * m:3 * m] = self.delta_floor - d
        out[3 * m:4 * m] = -s
        out[self.i_simplex] = d.sum() - self.delta_total
        s2 = s * s
        out[self.i_quota:self.i_quota + m] = self.a_loc * f + s2 - self.q
        rate = s2 / d - self.c_rate
        if self.has_pos:
            p = x[self.sp]
            diff = p[None, :] - self.p_ref
            rate = rate + self.beta * (diff[:, 0] ** 2 + diff[:, 1] ** 2)
            ru = p - self.p_u
            rf = p - self.p_F
            out[self.i_speed] = ru[0] ** 2 + ru[1] ** 2 - self.r_speed ** 2
            out[self.i_reach] = rf[0] ** 2 + rf[1] ** 2 - self.r_reach ** 2
        out[self.i_rate:self.i_rate + m] = rate
        if self.has_y:
            y = x[self.iy]
            p = x[self.sp]
            yl_term = self.slack_a0 + self.slack_ay * y + float(self.slack_ap @ (p - self.p_u))
            out[self.i_slack] = self.c3 / (y * y) - yl_term
            out[self.i_ylo] = self.y_lo - y
            out[self.i_yhi] = y - self.y_hi
        return out

    def cons_jacobian(self, x) -> np.ndarray:
        """Dense Jacobian of all constraints; rows follow cons() order."""
        m = self.m
        d, s = x[self.sd], x[self.ss]
        J = self._jac_template.copy()
        idx = np.arange(m)
        J[self.i_quota + idx, 2 * m + idx] = 2.0 * s
        J[self.i_rate + idx, m + idx] = -(s * s) / (d * d)
        J[self.i_rate + idx, 2 * m + idx] = 2.0 * s / d
        if self.has_pos:
            p = x[self.sp]
            J[self.i_rate:self.i_rate + m, self.sp] = 2.0 * self.beta[:, None] * (p[None, :] - self.p_ref)
            J[self.i_speed, self.sp] = 2.0 * (p - self.p_u)
            J[self.i_reach, self.sp] = 2.0 * (p - self.p_F)
        if self.has_y:
            y = x[self.iy]
            J[self.i_slack, self.iy] = -2.0 * self.c3 / y ** 3 - self.slack_ay
        return J

    def cons_hess_weighted(self, x, w) -> np.ndarray:
        """Sum of w_i * hess(g_i) over the curved constraints."""
        m, n = self.m, self.nvar
        d, s = x[self.sd], x[self.ss]
        H = np.zeros((n, n))
        idx = np.arange(m)
        wq = w[self.i_quota:self.i_quota + m]
        wr = w[self.i_rate:self.i_rate + m]
        H[2 * m + idx, 2 * m + idx] += 2.0 * wq + wr * 2.0 / d
        H[m + idx, m + idx] += wr * 2.0 * s * s / d ** 3
        cross = -wr * 2.0 * s / (d * d)
        H[m + idx, 2 * m + idx] += cross
        H[2 * m + idx, m + idx] += cross
        if self.has_pos:
            ball_w = w[self.i_speed] + w[self.i_reach] + float(np.sum(wr * self.beta))
            H[self.sp, self.sp] += ball_w * 2.0 * np.eye(2)
        if self.has_y:
            y = x[self.iy]
            H[self.iy, self.iy] += w[self.i_slack] * 6.0 * self.c3 / y ** 4
        return H

    # -- feasible starting point ----------------------------------------

    def interior_point(self, hint=None) -> np.ndarray:
        x = np.zeros(self.nvar)
        m = self.m
        if self.has_pos:
            x[self.sp] = self._interior_position(None if hint is None else hint[self.sp])
        if m:
            d0 = np.full(m, 0.5 * self.delta_total / m)
            d0 = np.maximum(d0, 2.0 * self.delta_floor)
            x[self.sd] = d0
            f0 = np.minimum(0.2 * self.f_max, 0.2 * self.q / self.a_loc)
            x[self.sf] = np.maximum(f0, 1e-12)
            res = self.q - self.a_loc * x[self.sf]
            cap = self.c_rate.copy()
            if self.has_pos:
                diff = x[self.sp][None, :] - self.p_ref
                cap = cap - self.beta * np.sum(diff * diff, axis=1)
            if np.any(cap <= 0):
                raise SolverFailure("rate bound non-positive at the starting position")
            x[self.ss] = np.sqrt(0.4 * np.minimum(res, d0 * cap))
        if self.has_y:
            y = max(self.slack_ay / 2.0, 5.0 * self.y_lo)
            p = x[self.sp]
            for _ in range(80):
                lhs = self.c3 / (y * y)
                rhs = self.slack_a0 + self.slack_ay * y + float(self.slack_ap @ (p - self.p_u))
                if lhs < rhs - 1e-9 and y < self.y_hi * 0.98:
                    break
                y = min(y * 1.5 + 0.1, self.y_hi * 0.98)
            x[self.iy] = y
        g = self.cons(x)
        if np.max(g) >= 0:
            raise SolverFailure(f"could not build a strictly feasible start (max g = {np.max(g):.3g})")
        return x

    def _interior_position(self, hint):
        # deepest point along the segment between the two ball centers
        pu, pF = self.p_u, self.p_F
        D = float(np.linalg.norm(pF - pu))
        if D < 1e-15:
            deep = pu.copy()
        else:
            tstar = (D + self.r_speed - self.r_reach) / (2.0 * D)
            tstar = min(max(tstar, 0.0), 1.0)
            deep = pu + tstar * (pF - pu)
        cand = deep if hint is None else np.asarray(hint, dtype=float)
        for _ in range(60):
            ok = (np.linalg.norm(cand - pu) < self.r_speed * (1 - 1e-9)
                  and np.linalg.norm(cand - pF) < self.r_reach * (1 - 1e-9))
            if ok:
                return cand
            cand = 0.5 * (cand + deep)
        raise SolverFailure("kinematic ball intersection has no usable interior")


@dataclass
class ResourceSubproblem:
    """Fixed-position resource allocation over CPU frequencies and durations.

    Variables ``[f (m), d (m)]``; offloaded bits are ``rate * d`` directly, so
    all constraints are affine and the objective is cubic-plus-linear.
    """

    m: int
    c0: float
    f3: np.ndarray
    f1: np.ndarray
    d1: np.ndarray
    f_max: np.ndarray
    q: np.ndarray
    a_loc: np.ndarray
    r_hat: np.ndarray        # scaled rate per user (quota coefficient of d)
    delta_total: float

    def __post_init__(self):
        m = self.m
        self.sf = slice(0, m)
        self.sd = slice(m, 2 * m)
        self.nvar = 2 * m
        self.n_cons = 4 * m + 1

    def objective(self, x) -> float:
        f, d = x[self.sf], x[self.sd]
        return self.c0 + float(self.f3 @ (f ** 3) + self.f1 @ f + self.d1 @ d)

    def obj_grad(self, x) -> np.ndarray:
        g = np.empty(self.nvar)
        f = x[self.sf]
        g[self.sf] = 3.0 * self.f3 * f * f + self.f1
        g[self.sd] = self.d1
        return g

    def obj_hess(self, x) -> np.ndarray:
        H = np.zeros((self.nvar, self.nvar))
        idx = np.arange(self.m)
        H[idx, idx] = 6.0 * self.f3 * x[self.sf]
        return H

    def cons(self, x) -> np.ndarray:
        f, d = x[self.sf], x[self.sd]
        return np.concatenate([
            -f, f - self.f_max, -d,
            [np.sum(d) - self.delta_total],
            self.a_loc * f + self.r_hat * d - self.q,
        ])

    def cons_jacobian(self, x) -> np.ndarray:
        m, n = self.m, self.nvar
        eye = np.eye(n)
        simp = np.zeros((1, n))
        simp[0, self.sd] = 1.0
        quota = np.zeros((m, n))
        for k in range(m):
            quota[k, k] = self.a_loc[k]
            quota[k, m + k] = self.r_hat[k]
        return np.vstack([-eye[0:m], eye[0:m], -eye[m:2 * m], simp, quota])

    def cons_hess_weighted(self, x, w) -> np.ndarray:
        return np.zeros((self.nvar, self.nvar))

    def interior_point(self, hint=None) -> np.ndarray:
        m = self.m
        x = np.empty(self.nvar)
        f0 = np.minimum(0.25 * self.f_max, 0.25 * self.q / self.a_loc)
        x[self.sf] = np.maximum(f0, 1e-12)
        res = self.q - self.a_loc * x[self.sf]
        d0 = np.minimum(0.4 * self.delta_total / m, 0.25 * res / np.maximum(self.r_hat, 1e-12))
        x[self.sd] = np.maximum(d0, 1e-12)
        g = self.cons(x)
        if np.max(g) >= 0:
            raise SolverFailure("no strictly feasible start for resource problem")
        return x


# ---------------------------------------------------------------------------
# barrier core
# ---------------------------------------------------------------------------


def _barrier_value(sub, x, inv_t):
    g = sub.cons(x)
    if np.max(g) >= 0:
        return np.inf
    return sub.objective(x) - inv_t * float(np.sum(np.log(-g)))


def _newton_direction(H, rhs):
    n = H.shape[0]
    base = 1e-12 * max(1.0, float(np.trace(H)) / n)
    reg = 0.0
    for _ in range(10):
        try:
            c = scipy.linalg.cho_factor(H + reg * np.eye(n), check_finite=False)
            return scipy.linalg.cho_solve(c, rhs, check_finite=False)
        except (scipy.linalg.LinAlgError, ValueError):
            reg = base if reg == 0.0 else reg * 100.0
    raise SolverFailure("Newton system factorization failed")


def _minimize_barrier(sub, x0, opts: SolverOptions):
    # works on objective + barrier/t so late stages stay well conditioned
    x = np.asarray(x0, dtype=float).copy()
    if np.max(sub.cons(x)) >= 0:
        raise SolverFailure("barrier started outside the strict interior")
    t = opts.t0
    total = 0
    status = "converged"
    while True:
        inv_t = 1.0 / t
        stage_tol = max(opts.newton_tol, min(1e-4, 0.01 * sub.n_cons * inv_t))
        for _ in range(opts.max_newton):
            g = sub.cons(x)
            lam = 1.0 / (-g)
            jac = sub.cons_jacobian(x)
            grad = sub.obj_grad(x) + inv_t * (jac.T @ lam)
            H = (sub.obj_hess(x)
                 + inv_t * ((jac.T * (lam * lam)) @ jac)
                 + inv_t * sub.cons_hess_weighted(x, lam))
            step_dir = _newton_direction(H, -grad)
            decrement = float(-grad @ step_dir)
            if not math.isfinite(decrement):
                raise SolverFailure("non-finite Newton decrement")
            if decrement / 2.0 <= stage_tol:
                break
            phi0 = _barrier_value(sub, x, inv_t)
            slope = float(grad @ step_dir)
            step = 1.0
            while step > 1e-14:
                phin = _barrier_value(sub, x + step * step_dir, inv_t)
                if phin <= phi0 + opts.armijo * step * slope:
                    break
                step *= opts.backtrack
            if step <= 1e-14 or phi0 - phin <= 1e-13 * max(1.0, abs(phi0)):
                break  # progress exhausted at this stage
            x = x + step * step_dir
            total += 1
        if sub.n_cons / t <= opts.gap:
            break
        t *= opts.mu
        if t > 1e18:
            status = "max_t"
            break
    return x, total, status, t


def solve_step(sub, warm_start=None, options: SolverOptions | None = None) -> SolverReport:
    """Solve a convex subproblem to the configured duality gap.

    ``warm_start`` must be strictly feasible when given; otherwise a default
    interior point is constructed.
    """
    opts = options or SolverOptions()
    if warm_start is not None:
        x0 = np.asarray(warm_start, dtype=float)
        if np.max(sub.cons(x0)) >= 0:
            x0 = sub.interior_point(hint=x0)
    else:
        x0 = sub.interior_point()
    x, iters, status, t = _minimize_barrier(sub, x0, opts)
    g = sub.cons(x)
    stat = kkt_residual(sub, x)
    return SolverReport(
        x=x,
        objective=sub.objective(x),
        max_violation=float(max(0.0, np.max(g))),
        stationarity=stat,
        iterations=iters,
        status=status,
        t_final=t,
    )


def kkt_residual(sub, x) -> float:
    """Scaled stationarity residual of a feasible point.

    Multipliers for the near-active constraints are fit by non-negative least
    squares; the residual is the remaining gradient norm relative to the
    objective gradient.
    """
    x = np.asarray(x, dtype=float)
    g = sub.cons(x)
    grad = sub.obj_grad(x)
    jac = sub.cons_jacobian(x)
    active = g >= -1e-4
    scale = max(1.0, float(np.linalg.norm(grad)))
    if not np.any(active):
        return float(np.linalg.norm(grad)) / scale
    A = jac[active].T
    lam, _ = scipy.optimize.nnls(A, -grad)
    return float(np.linalg.norm(grad + A @ lam)) / scale


# ---------------------------------------------------------------------------
# fixed-position resource allocation (used by the "go" baseline and the
# forced final slots of every policy)
# ---------------------------------------------------------------------------


def build_resource_subproblem(problem, p_fixed, active) -> tuple[ResourceSubproblem, np.ndarray]:
    """Resource subproblem at a pinned position; returns it plus physical rates."""
    c = problem.config
    act = np.asarray(active, dtype=int)
    rates = np.array([problem.rate_at(k, p_fixed) for k in act])
    q_hat = c.s_q * problem.q_bits[act]
    a_loc = c.s_q * FREQ_SCALE * c.delta / c.C_k[act]
    sub = ResourceSubproblem(
        m=len(act),
        c0=0.0,
        f3=c.V * c.w_k[act] * c.gamma_c * FREQ_SCALE ** 3 * c.delta,
        f1=-q_hat * a_loc,
        d1=c.V * c.w_k[act] * c.P_k[act] - q_hat * (c.s_q * rates),
        f_max=c.f_max[act] / FREQ_SCALE,
        q=q_hat,
        a_loc=a_loc,
        r_hat=c.s_q * rates,
        delta_total=c.delta,
    )
    return sub, rates


def solve_fixed_position(problem, p_fixed, options: SolverOptions | None = None):
    """Exact optimum of the slot problem with the UAV position pinned.

    Minimizes the weighted user energy minus the backlog-weighted served
    bits over frequencies and offload durations; offloaded bits are
    ``duration * rate`` at the pinned position.  Returns a SlotDecision.
    """
    from .system import SlotDecision  # local import to keep this module generic

    c = problem.config
    p_fixed = np.asarray(p_fixed, dtype=float).reshape(2)
    f = np.zeros(c.K)
    dlt = np.zeros(c.K)
    l_o = np.zeros(c.K)
    active = np.flatnonzero(problem.q_bits > 0.5)
    if active.size:
        sub, rates = build_resource_subproblem(problem, p_fixed, active)
        opts = options or SolverOptions(gap=c.barrier_gap)
        report = solve_step(sub, options=opts)
        f_act = np.maximum(report.x[sub.sf], 0.0) * FREQ_SCALE
        d_act = np.maximum(report.x[sub.sd], 0.0)
        bits = d_act * rates
        drop = bits < 1.0
        d_act[drop] = 0.0
        bits[drop] = 0.0
        f_act[f_act * c.delta / c.C_k[active] < 1.0] = 0.0
        f[active] = f_act
        dlt[active] = d_act
        l_o[active] = bits
    l_c = f * c.delta / c.C_k
    over = l_c + l_o - problem.q_bits
    fix = over > 0
    l_o[fix] = np.maximum(problem.q_bits[fix] - l_c[fix], 0.0)
    E_c = c.gamma_c * f ** 3 * c.delta
    E_o = dlt * c.P_k
    return SlotDecision(
        f_k=f, delta_k=dlt, p_next=p_fixed,
        l_c=l_c, l_o=l_o, E_c=E_c, E_o=E_o,
        E_uav=problem.propulsion_energy(p_fixed),
    )
