"""Maximum certified disturbance magnitude.

For a fixed zbar the constraints are linear in ubar:

    gamma_zu ubar <= zbar - gamma_zv w(zbar) - 2 eps      (angle rows)
    gamma_yu ubar <= ybar - gamma_yv w(zbar) - eps        (frequency rows)

with w(zbar) = gamma_psi(zbar) zbar convex on the box 0 <= zbar <= pi - |phi*|,
so the set of feasible (zbar, ubar) is convex. The inner problem in ubar is a
row minimum (direction-coupled) or a small LP (free); the outer problem over
zbar is solved by a log-barrier Newton method from several seeds.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import linprog

from . import config, utils
from .certificates import CertificateResult, check_cico, spectral_radius
from .errors import CertificationError, ProblemError
from .gain import GainMatrices, sector_weight
from .task_system import Task, TaskManager

COUPLED = "coupled"
FREE = "free"


@dataclass(frozen=True)
class OptProblem:
    gains: GainMatrices
    phi_star: np.ndarray
    direction_c: np.ndarray
    ybar: np.ndarray  # Hz, inf entries are unconstrained

    @classmethod
    def create(cls, gains: GainMatrices, phi_star, direction_c, ybar=math.inf) -> 'OptProblem':
        phi_star = np.asarray(phi_star, dtype=float)
        c = np.asarray(direction_c, dtype=float)
        m = gains.yu.shape[0]
        if c.shape != (gains.zu.shape[1],):
            raise ProblemError(f"direction has {c.size} entries, expected {gains.zu.shape[1]}")
        if np.any(~np.isfinite(c)) or np.any(c < 0):
            raise ProblemError("direction entries must be finite and nonnegative")
        if not np.any(c > 0):
            raise ProblemError("degenerate direction: c = 0")
        ybar = np.broadcast_to(np.asarray(ybar, dtype=float), (m,)).copy()
        if np.any(np.isnan(ybar)) or np.any(ybar <= 0):
            raise ProblemError(f"infeasible ybar: every frequency limit must be positive, got {ybar}")
        if np.any(np.abs(phi_star) > math.pi / 2):
            raise ProblemError("equilibrium line angles must satisfy |phi*| <= pi/2")
        return cls(gains=gains, phi_star=phi_star, direction_c=c, ybar=ybar)

    @property
    def domain(self) -> np.ndarray:
        """Upper end of the per-line box 0 <= zbar <= pi - |phi*|."""
        return math.pi - np.abs(self.phi_star)

    @property
    def c_hat(self) -> np.ndarray:
        return self.direction_c / self.direction_c.max()


@dataclass
class OptSolution:
    mu_star: float  # c^T ubar*
    scale: float  # ubar* = scale * c_hat in coupled mode
    ubar_star: np.ndarray
    zbar_star: np.ndarray
    certificate: CertificateResult
    binding_row: str = ""
    mode: str = COUPLED
    solver_stats: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "mu_star": self.mu_star,
            "scale": self.scale,
            "ubar_star": self.ubar_star,
            "zbar_star": self.zbar_star,
            "binding_row": self.binding_row,
            "certificate": self.certificate.to_dict(),
            "solver_stats": self.solver_stats,
        }


@dataclass(frozen=True)
class SweepPoint:
    zbar: float  # grid value: zbar in rad (uniform) or the fraction of the domain box
    mu: float  # c^T ubar at the inner optimum
    scale: float
    binding_row: str
    margin: float  # smallest certificate margin at the inner optimum
    spectral_radius: float
    ybar_bound: float  # Hz, largest certified frequency deviation

    def to_row(self) -> dict:
        return {
            "zbar": self.zbar,
            "mu": self.mu,
            "binding_row": self.binding_row,
            "margin": self.margin,
            "scale": self.scale,
            "spectral_radius": self.spectral_radius,
            "ybar_bound": self.ybar_bound,
        }


class _Rows:
    """Constraint rows A_u ubar <= r(zbar) with the strictness margins folded into r."""

    def __init__(self, p: OptProblem):
        g = p.gains
        finite = np.isfinite(p.ybar)
        ell = g.zv.shape[0]
        self.phi_star = p.phi_star
        self.G = np.vstack([g.zv, g.yv[finite]])
        self.A_u = np.vstack([g.zu, g.yu[finite]])
        self.E = np.vstack([np.eye(ell), np.zeros((int(finite.sum()), ell))])
        self.base = np.concatenate([np.zeros(ell), p.ybar[finite]])
        self.eps = np.concatenate([np.full(ell, 2.0 * config.EPS_STRICT), np.full(int(finite.sum()), config.EPS_STRICT)])
        y_ids = [label.split(":", 1)[-1] for label in g.output_labels] or [str(i + 1) for i in range(g.yu.shape[0])]
        z_ids = list(g.line_labels) or [str(i + 1) for i in range(ell)]
        self.labels = [f"z:{k}" for k in z_ids] + [f"y:{j}" for j, keep in zip(y_ids, finite) if keep]

    def rhs(self, zbar: np.ndarray, with_margin: bool = True) -> np.ndarray:
        w, _, _ = sector_weight(self.phi_star, zbar)
        r = self.base + self.E @ zbar - self.G @ w
        return r - self.eps if with_margin else r

    def jacobian(self, zbar: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """d r / d zbar and the per-row curvature weights G_k * w''(zbar)."""
        _, dw, d2w = sector_weight(self.phi_star, zbar)
        return self.E - self.G * dw[None, :], self.G * d2w[None, :]


def _inner_coupled(rows: _Rows, c_hat: np.ndarray, zbar: np.ndarray) -> tuple[float, int]:
    """Largest mu with A_u (mu c_hat) <= r(zbar), and the binding row index."""
    r = rows.rhs(zbar)
    if np.any(r < 0):
        return 0.0, int(np.argmin(r))
    d = rows.A_u @ c_hat
    active = d > 0
    if not np.any(active):
        raise ProblemError("degenerate direction: the disturbance does not reach any constrained output")
    ratios = np.full(r.shape, np.inf)
    ratios[active] = r[active] / d[active]
    k = int(np.argmin(ratios))
    return float(ratios[k]), k


def _inner_free(rows: _Rows, c_hat: np.ndarray, zbar: np.ndarray) -> tuple[np.ndarray, int]:
    """max c_hat^T u subject to A_u u <= r(zbar), u >= 0."""
    r = rows.rhs(zbar)
    if np.any(r < 0):
        return np.zeros(c_hat.size), int(np.argmin(r))
    res = linprog(-c_hat, A_ub=rows.A_u, b_ub=r, bounds=[(0, None)] * c_hat.size, method="highs")
    if res.status == 3:
        raise ProblemError("free-mode problem is unbounded: some disturbance channel reaches no constrained output")
    if res.status != 0:
        utils.print_warning(f"Inner LP failed at zbar={zbar}: {res.message}")
        return np.zeros(c_hat.size), int(np.argmin(r))
    u = np.maximum(res.x, 0.0)
    slack = r - rows.A_u @ u
    return u, int(np.argmin(slack))


class _Barrier:
    """phi(x) = -t obj(q) - sum log g(x) - sum log zbar - sum log(U - zbar) [- sum log q], x = (zbar, q), ubar = P q."""

    def __init__(self, rows: _Rows, P: np.ndarray, obj: np.ndarray, U: np.ndarray, free: bool):
        self.rows, self.P, self.obj, self.U, self.free = rows, P, obj, U, free
        self.ell = U.size
        self.AP = rows.A_u @ P

    @property
    def terms(self) -> int:
        return self.rows.A_u.shape[0] + 2 * self.ell + (self.P.shape[1] if self.free else 0)

    def split(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return x[:self.ell], x[self.ell:]

    def feasible(self, x: np.ndarray) -> bool:
        z, q = self.split(x)
        if np.any(z <= 0) or np.any(z >= self.U) or (self.free and np.any(q <= 0)):
            return False
        return bool(np.all(self.rows.rhs(z) - self.AP @ q > 0))

    def value(self, x: np.ndarray, t: float) -> float:
        if not self.feasible(x):
            return math.inf
        z, q = self.split(x)
        g = self.rows.rhs(z) - self.AP @ q
        total = -t * float(self.obj @ q) - np.log(g).sum() - np.log(z).sum() - np.log(self.U - z).sum()
        if self.free:
            total -= np.log(q).sum()
        return float(total)

    def derivatives(self, x: np.ndarray, t: float) -> tuple[np.ndarray, np.ndarray]:
        z, q = self.split(x)
        g = self.rows.rhs(z) - self.AP @ q
        Jz, curvature = self.rows.jacobian(z)
        J = np.hstack([Jz, -self.AP])
        inv_g = 1.0 / g
        grad = -J.T @ inv_g
        grad[:self.ell] += -1.0 / z + 1.0 / (self.U - z)
        grad[self.ell:] -= t * self.obj
        hess = (J * (inv_g ** 2)[:, None]).T @ J
        box = curvature.T @ inv_g + 1.0 / z ** 2 + 1.0 / (self.U - z) ** 2
        hess[:self.ell, :self.ell] += np.diag(box)
        if self.free:
            grad[self.ell:] -= 1.0 / q
            hess[self.ell:, self.ell:] += np.diag(1.0 / q ** 2)
        return grad, hess


def _run_seed(task: Task) -> dict:
    """Task handler: barrier path-following from one strictly feasible seed."""
    barrier: _Barrier = task.params["barrier"]
    x = task.params["x0"].copy()
    t = 1.0
    newton_steps, rounds, decrement = 0, 0, math.inf
    while True:
        rounds += 1
        for _ in range(config.OPT_NEWTON_MAX_ITER):
            grad, hess = barrier.derivatives(x, t)
            try:
                step = -np.linalg.solve(hess, grad)
            except np.linalg.LinAlgError:
                step = -np.linalg.lstsq(hess, grad, rcond=None)[0]
            decrement = float(-grad @ step)
            if not math.isfinite(decrement) or decrement / 2 <= config.OPT_NEWTON_TOL:
                break
            f0 = barrier.value(x, t)
            s = 1.0
            while s > 1e-16:
                candidate = x + s * step
                if barrier.value(candidate, t) <= f0 - 0.25 * s * decrement:
                    break
                s *= 0.5
            else:
                break
            x = candidate
            newton_steps += 1
        if barrier.terms / t < config.OPT_BARRIER_GAP:
            break
        t *= config.OPT_BARRIER_MU
    z, q = barrier.split(x)
    return {"zbar": z, "q": q, "newton_steps": newton_steps, "rounds": rounds, "decrement": decrement}


TaskManager.get_instance().register_handler("opt_seed", _run_seed)


def constraint_margins(p: OptProblem, ubar: np.ndarray, zbar: np.ndarray) -> np.ndarray:
    """Slack of every finite constraint row, without the strictness margins (angle rows first)."""
    rows = _Rows(p)
    return rows.rhs(np.asarray(zbar, dtype=float), with_margin=False) - rows.A_u @ np.asarray(ubar, dtype=float)


def _seed_points(p: OptProblem, rows: _Rows, seeds: int, free: bool) -> list[np.ndarray]:
    U = p.domain
    c_hat = p.c_hat
    direction = c_hat + 1e-3 if free else c_hat
    fractions = list((np.arange(seeds) + 0.5) / seeds)
    starts = []
    for f in fractions:
        z0 = f * U
        mu, _ = _inner_coupled(rows, direction, z0)
        if mu > 0:
            q0 = 0.5 * mu * direction if free else np.array([0.5 * mu])
            starts.append(np.concatenate([z0, q0]))
    f = min(fractions)
    while not starts and f > 1e-8:
        f *= 0.1
        z0 = f * U
        mu, _ = _inner_coupled(rows, direction, z0)
        if mu > 0:
            q0 = 0.5 * mu * direction if free else np.array([0.5 * mu])
            starts.append(np.concatenate([z0, q0]))
    return starts


def max_disturbance(p: OptProblem, mode: str = COUPLED, seeds: Optional[int] = None) -> OptSolution:
    """Largest certified disturbance along direction c (coupled) or over all ubar >= 0 weighted by c (free)."""
    if mode not in (COUPLED, FREE):
        raise ProblemError(f"unknown mode {mode!r}, expected '{COUPLED}' or '{FREE}'")
    seeds = seeds or config.OPT_SEEDS
    free = mode == FREE
    rows = _Rows(p)
    c_hat = p.c_hat
    U = p.domain
    P = np.eye(c_hat.size) if free else c_hat[:, None]
    barrier = _Barrier(rows, P, P.T @ c_hat, U, free)

    starts = _seed_points(p, rows, seeds, free)
    if not starts:
        raise CertificationError("no strictly feasible starting point: the certificate fails even for vanishing zbar")
    utils.print_debug(f"Optimizer ({mode}): {len(starts)} feasible seeds of {seeds}")
    results = TaskManager.get_instance().run_batch("opt_seed", [{"barrier": barrier, "x0": x0} for x0 in starts])

    candidates = []
    for result in results:
        z = np.clip(result["zbar"], 0.0, U)
        if free:
            ubar, k = _inner_free(rows, c_hat, z)
        else:
            scale, k = _inner_coupled(rows, c_hat, z)
            ubar = scale * c_hat
        slack = rows.rhs(z) - rows.A_u @ ubar
        candidates.append((float(p.direction_c @ ubar), float(slack.min()), z, ubar, k, result))

    best_mu = max(c[0] for c in candidates)
    tied = [c for c in candidates if c[0] >= best_mu - 1e-9 * max(abs(best_mu), 1.0)]
    mu, _, zbar, ubar, k, best = max(tied, key=lambda c: c[1])

    certificate = check_cico(p.gains, p.phi_star, ubar, zbar, p.ybar)
    shrink = 0
    while not certificate.cico_ok and shrink < 5:
        shrink += 1
        ubar = ubar * (1.0 - 1e-9 * 10 ** shrink)
        certificate = check_cico(p.gains, p.phi_star, ubar, zbar, p.ybar)
    if not certificate.cico_ok:
        raise CertificationError(f"optimizer point at zbar={zbar} failed re-certification")
    mu = float(p.direction_c @ ubar)

    margins = np.concatenate([certificate.margins_z, certificate.margins_y[np.isfinite(certificate.margins_y)]])
    barrier_mu = float(p.direction_c @ (P @ best["q"]))
    stats = {
        "seeds": seeds,
        "feasible_seeds": len(starts),
        "newton_steps": int(sum(r["newton_steps"] for r in results)),
        "barrier_rounds": int(best["rounds"]),
        "newton_decrement": best["decrement"],
        "barrier_objective": barrier_mu,
        "inner_gap": mu - barrier_mu,
        "min_margin": float(margins.min()),
        "shrink_steps": shrink,
    }
    utils.print_info(f"Certified mu* = {mu:.6g} at max zbar {zbar.max():.4f} rad (binding {rows.labels[k]})")
    return OptSolution(
        mu_star=mu,
        scale=float(ubar.max()),
        ubar_star=ubar,
        zbar_star=zbar,
        certificate=certificate,
        binding_row=rows.labels[k],
        mode=mode,
        solver_stats=stats,
    )


def sweep_zbar(p: OptProblem, zbar_grid, uniform: bool = True, mode: str = COUPLED) -> list[SweepPoint]:
    """Inner optimum along a grid of zbar values (uniform: zbar itself, else fractions of the domain box)."""
    rows = _Rows(p)
    U = p.domain
    c_hat = p.c_hat
    points = []
    for value in np.asarray(zbar_grid, dtype=float):
        zbar = np.full(U.shape, value) if uniform else value * U
        if value < 0 or np.any(zbar > U + 1e-12):
            points.append(SweepPoint(float(value), 0.0, 0.0, "domain", math.nan, math.nan, math.nan))
            continue
        zbar = np.minimum(zbar, U)
        if mode == FREE:
            ubar, k = _inner_free(rows, c_hat, zbar)
        else:
            scale, k = _inner_coupled(rows, c_hat, zbar)
            ubar = scale * c_hat
        w, _, _ = sector_weight(p.phi_star, zbar)
        slack = rows.rhs(zbar, with_margin=False) - rows.A_u @ ubar
        psi = np.divide(w, zbar, out=np.zeros_like(w), where=zbar > 0)
        y_bound = p.gains.yu @ ubar + p.gains.yv @ w
        points.append(SweepPoint(
            zbar=float(value),
            mu=float(p.direction_c @ ubar),
            scale=float(ubar.max(initial=0.0)),
            binding_row=rows.labels[k],
            margin=float(slack.min()),
            spectral_radius=spectral_radius(p.gains.zv * psi[None, :]),
            ybar_bound=float(y_bound.max()),
        ))
    return points
