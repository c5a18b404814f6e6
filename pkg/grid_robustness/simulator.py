"""Nonlinear time-domain simulation of the structure-preserving swing/governor model.

States use the same deviation coordinates and ordering as the Lur'e form, so
y = C_y x / 2pi and z = C_z x hold for every sample.
"""

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from scipy.integrate import solve_ivp

from . import config, utils
from .disturbance import Disturbance, step_family
from .errors import SynchronismLossError
from .lure import HZ_PER_RAD_S
from .network import Equilibrium, GridCase
from .task_system import Task, TaskManager


class SwingDynamics:
    """Right-hand side x' = f(x, u) in deviation coordinates around the equilibrium."""

    def __init__(self, case: GridCase, eq: Equilibrium):
        self.case = case
        index = case.bus_index
        gen_ids = case.generator_ids
        load_ids = case.dynamic_load_ids
        self.m, self.n, self.ell = len(gen_ids), len(load_ids), case.ell
        gens = [case.generators[b] for b in gen_ids]
        self.governed = np.array([i for i, gen in enumerate(gens) if gen.has_governor], dtype=int)
        self.g = self.governed.size

        E = case.incidence()
        self.E_G = E[[index[b] for b in gen_ids], :]
        self.E_L = E[[index[b] for b in load_ids], :] if self.n else np.zeros((0, self.ell))
        self.phi = case.phi
        self.phi_star = np.asarray(eq.phi_star, dtype=float)
        self.M = np.array([gen.M for gen in gens])
        self.D_G = np.array([gen.D for gen in gens])
        self.T = np.array([gens[i].T for i in self.governed])
        self.R = np.array([gens[i].R for i in self.governed])
        self.D_L = np.array([case.loads[b].D for b in load_ids])
        self.P_L = np.array([case.loads[b].Pl for b in load_ids])
        self.p_star = np.asarray(eq.p_star, dtype=float)

        to_governor = np.array([case.injection == "governor" and gen.has_governor for gen in gens], dtype=bool)
        self.swing_inputs = np.where(~to_governor)[0]
        self.governor_inputs = np.where(to_governor)[0]
        position = {int(i): k for k, i in enumerate(self.governed)}
        self.governor_rows = np.array([position[int(i)] for i in self.governor_inputs], dtype=int)

        m, n = self.m, self.n
        self.s1, self.s2 = slice(0, m), slice(m, 2 * m)
        self.s3, self.s4 = slice(2 * m, 2 * m + n), slice(2 * m + n, 2 * m + n + self.g)
        self.dim = 2 * m + n + self.g
        self.C_y = np.zeros((m, self.dim))
        self.C_y[:, self.s2] = np.eye(m)
        self.C_z = np.zeros((self.ell, self.dim))
        self.C_z[:, self.s1] = self.E_G.T
        self.C_z[:, self.s3] = self.E_L.T

    @property
    def input_dim(self) -> int:
        return self.m + self.n

    def line_angles(self, x: np.ndarray) -> np.ndarray:
        return self.phi_star + self.C_z @ x

    def rhs(self, t: float, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        u_G, u_L = u[:self.m], u[self.m:]
        flows = self.phi * np.sin(self.line_angles(x))
        omega = x[self.s2]

        p_mech = self.p_star.copy()
        p_mech[self.governed] += x[self.s4]
        p_mech[self.swing_inputs] += u_G[self.swing_inputs]

        dx = np.empty_like(x)
        dx[self.s1] = omega
        dx[self.s2] = (p_mech - self.D_G * omega - self.E_G @ flows) / self.M
        dx[self.s3] = (self.P_L + u_L - self.E_L @ flows) / self.D_L
        governor_u = np.zeros(self.g)
        governor_u[self.governor_rows] = u_G[self.governor_inputs]
        dx[self.s4] = (-x[self.s4] - omega[self.governed] / self.R + governor_u) / self.T
        return dx

    def energy(self, x: np.ndarray) -> float:
        """Damped-Hamiltonian energy of the machines and lines; nonincreasing with u = 0 when no generator has a governor."""
        omega = x[self.s2]
        kinetic = 0.5 * float(omega @ (self.M * omega))
        potential = -float(self.phi @ np.cos(self.line_angles(x)))
        work = float(self.p_star @ x[self.s1]) + float(self.P_L @ x[self.s3])
        return kinetic + potential - work


@dataclass(frozen=True)
class IntegratorSettings:
    method: str = "RK45"
    rtol: Optional[float] = None
    atol: Optional[float] = None
    sample_dt: Optional[float] = None  # s
    slip_angle: Optional[float] = None  # rad

    def resolved(self) -> 'IntegratorSettings':
        return IntegratorSettings(
            method=self.method,
            rtol=config.SIM_RTOL if self.rtol is None else self.rtol,
            atol=config.SIM_ATOL if self.atol is None else self.atol,
            sample_dt=config.SIM_SAMPLE_DT if self.sample_dt is None else self.sample_dt,
            slip_angle=config.SLIP_ANGLE if self.slip_angle is None else self.slip_angle,
        )


@dataclass(frozen=True)
class Trajectory:
    t: np.ndarray  # s
    x: np.ndarray  # samples x states
    y: np.ndarray  # Hz
    z: np.ndarray  # rad
    u: np.ndarray  # pu
    peak_y: np.ndarray
    peak_z: np.ndarray
    gen_ids: tuple[int, ...] = ()
    line_labels: tuple[str, ...] = ()
    nfev: int = 0

    def to_rows(self) -> list[dict]:
        y_names = [f"y:{b}" for b in self.gen_ids] or [f"y:{i + 1}" for i in range(self.y.shape[1])]
        z_names = [f"z:{k}" for k in self.line_labels] or [f"z:{i + 1}" for i in range(self.z.shape[1])]
        rows = []
        for k, t in enumerate(self.t):
            row = {"t": float(t)}
            row.update(zip(y_names, self.y[k]))
            row.update(zip(z_names, self.z[k]))
            rows.append(row)
        return rows

    def summary(self) -> dict:
        return {
            "horizon": float(self.t[-1]) if self.t.size else 0.0,
            "samples": int(self.t.size),
            "peak_y": self.peak_y,
            "peak_z": self.peak_z,
            "max_peak_y": float(self.peak_y.max(initial=0.0)),
            "max_peak_z": float(self.peak_z.max(initial=0.0)),
            "nfev": self.nfev,
        }


def refined_peaks(values: np.ndarray) -> np.ndarray:
    """Per-column max |v|, polished by a quadratic through the three samples around the discrete maximum."""
    values = np.atleast_2d(values)
    if values.shape[0] == 0:
        return np.zeros(values.shape[1])
    peaks = np.max(np.abs(values), axis=0)
    if values.shape[0] < 3:
        return peaks
    for j in range(values.shape[1]):
        k = int(np.argmax(np.abs(values[:, j])))
        if 0 < k < values.shape[0] - 1:
            sign = 1.0 if values[k, j] >= 0 else -1.0
            a, b, c = sign * values[k - 1:k + 2, j]
            curvature = a - 2 * b + c
            if curvature < 0:
                peaks[j] = max(peaks[j], b - (c - a) ** 2 / (8 * curvature))
    return peaks


def simulate(
    case: GridCase,
    eq: Equilibrium,
    d: Disturbance,
    horizon: float,
    controls: Optional[IntegratorSettings] = None,
    x0: Optional[np.ndarray] = None,
    dynamics: Optional[SwingDynamics] = None,
) -> Trajectory:
    """Integrate the nonlinear model under disturbance d from x0 (the equilibrium by default)."""
    if horizon <= 0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    settings = (controls or IntegratorSettings()).resolved()
    dyn = dynamics or SwingDynamics(case, eq)
    if d.size != dyn.input_dim:
        raise ValueError(f"disturbance has {d.size} channels, the case has {dyn.input_dim} inputs")
    x = np.zeros(dyn.dim) if x0 is None else np.asarray(x0, dtype=float).copy()

    steps = int(math.ceil(horizon / settings.sample_dt - 1e-9))
    grid = np.linspace(0.0, horizon, steps + 1)
    edges = [0.0, *d.breakpoints(horizon), horizon]

    def slipped(t, state):
        return settings.slip_angle - float(np.max(np.abs(dyn.line_angles(state)), initial=0.0))
    slipped.terminal = True
    slipped.direction = -1

    times, states, nfev = [grid[:1]], [x[None, :]], 0
    for a, b in zip(edges[:-1], edges[1:]):
        t_eval = grid[(grid > a) & (grid <= b)]
        if t_eval.size == 0 or t_eval[-1] < b:
            t_eval = np.append(t_eval, b)
        sol = solve_ivp(
            lambda t, s: dyn.rhs(t, s, d(t)),
            (a, b),
            x,
            method=settings.method,
            t_eval=t_eval,
            rtol=settings.rtol,
            atol=settings.atol,
            events=slipped,
        )
        nfev += sol.nfev
        if sol.status == 1:
            when = float(sol.t_events[0][0])
            raise SynchronismLossError(f"line angle reached {settings.slip_angle:.4g} rad (pole slip) at t = {when:.3f} s", time=when)
        if sol.status != 0:
            raise SynchronismLossError(f"integration failed at t = {sol.t[-1] if sol.t.size else a:.3f} s, probable loss of synchronism: {sol.message}", time=a)
        if not np.all(np.isfinite(sol.y)):
            raise SynchronismLossError("non-finite state encountered", time=a)
        x = sol.y[:, -1].copy()
        keep = np.isin(sol.t, grid)
        times.append(sol.t[keep])
        states.append(sol.y[:, keep].T)

    t = np.concatenate(times)
    X = np.vstack(states)
    y = HZ_PER_RAD_S * X @ dyn.C_y.T
    z = X @ dyn.C_z.T
    return Trajectory(
        t=t,
        x=X,
        y=y,
        z=z,
        u=d.sample(t),
        peak_y=refined_peaks(y),
        peak_z=refined_peaks(z),
        gen_ids=tuple(case.generator_ids),
        line_labels=tuple(case.line_labels),
        nfev=nfev,
    )


@dataclass(frozen=True)
class LimitSpec:
    """Bound checked on a trajectory: 'z' (rad per line) or 'y' (Hz per generator)."""
    kind: str
    values: np.ndarray

    def __post_init__(self):
        if self.kind not in ("z", "y"):
            raise ValueError(f"limit kind must be 'z' or 'y', got {self.kind!r}")
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))

    def violated(self, traj: Trajectory) -> bool:
        peaks = traj.peak_z if self.kind == "z" else traj.peak_y
        return bool(np.any(peaks > self.values))


def _run_scenario(task: Task) -> dict:
    """Task handler: simulate one scenario and report whether it violates the limit."""
    params = task.params
    try:
        traj = simulate(params["case"], params["eq"], params["disturbance"], params["horizon"], params.get("controls"), dynamics=params.get("dynamics"))
    except SynchronismLossError as e:
        return {"violated": True, "synchronism_lost": True, "time": e.time}
    limits: Sequence[LimitSpec] = params.get("limits") or []
    return {
        "violated": any(limit.violated(traj) for limit in limits),
        "synchronism_lost": False,
        "peak_y": traj.peak_y,
        "peak_z": traj.peak_z,
    }


TaskManager.get_instance().register_handler("scenario", _run_scenario)


def run_scenarios(
    case: GridCase,
    eq: Equilibrium,
    scenarios: Sequence[Disturbance],
    horizon: float,
    limits: Sequence[LimitSpec] = (),
    controls: Optional[IntegratorSettings] = None,
) -> list[dict]:
    """Simulate scenarios concurrently; results come back in scenario order."""
    dyn = SwingDynamics(case, eq)
    params = [
        {"case": case, "eq": eq, "disturbance": d, "horizon": horizon, "limits": list(limits), "controls": controls, "dynamics": dyn}
        for d in scenarios
    ]
    return TaskManager.get_instance().run_batch("scenario", params)


def empirical_upper_bound(
    case: GridCase,
    eq: Equilibrium,
    direction: np.ndarray,
    limit: Union[LimitSpec, Sequence[LimitSpec]],
    scenario_family: Optional[Sequence[Disturbance]] = None,
    bisect_tol: float = 1e-3,
    horizon: Optional[float] = None,
    controls: Optional[IntegratorSettings] = None,
) -> float:
    """Largest mu (within bisect_tol) at which no scenario, with its pattern set to mu * direction, violates the limit.

    Scenarios are sampled realizations, so the result bounds the admissible
    magnitude from above. Loss of synchronism counts as a violation.
    """
    direction = np.asarray(direction, dtype=float)
    if np.any(direction < 0) or not np.any(direction > 0):
        raise ValueError("direction must be nonnegative with at least one positive entry")
    family = list(scenario_family) if scenario_family is not None else step_family(direction)
    if not family:
        raise ValueError("scenario family is empty")
    horizon = config.EMPIRICAL_HORIZON if horizon is None else horizon
    limits = [limit] if isinstance(limit, LimitSpec) else list(limit)

    def violates(mu: float) -> bool:
        scenarios = [d.with_pattern(mu * direction) for d in family]
        return any(r["violated"] for r in run_scenarios(case, eq, scenarios, horizon, limits, controls))

    lo, hi = 0.0, config.EMPIRICAL_MU_START
    while not violates(hi):
        lo, hi = hi, 2.0 * hi
        if hi > config.EMPIRICAL_MU_CAP:
            utils.print_warning(f"No violation found up to mu = {lo:.4g}; reporting the cap")
            return lo
    while hi - lo > bisect_tol:
        mid = 0.5 * (lo + hi)
        if violates(mid):
            hi = mid
        else:
            lo = mid
    utils.print_debug(f"Empirical bound for {'+'.join(spec.kind for spec in limits)}-limits: mu in [{lo:.5g}, {hi:.5g}]")
    return lo
