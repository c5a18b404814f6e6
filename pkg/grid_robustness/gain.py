"""Element-wise L-infinity induced gains of the linear block and sector gains of the nonlinearity.

Each linear gain is the L1 norm of an impulse response, integrated on a fixed
RK4 grid and closed with a Lyapunov envelope on the tail, so every entry is an
upper bound. Frequency outputs are measured in Hz.
"""

import math
import time
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
import scipy.linalg
from scipy.optimize import minimize_scalar

from . import config, utils
from .errors import GainComputationError, HypothesisError
from .lure import HZ_PER_RAD_S, LureSystem
from .task_system import ProgressReporter, Task, TaskManager, split_batches

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class GainMatrices:
    yu: np.ndarray  # Hz/pu
    yv: np.ndarray  # Hz
    zu: np.ndarray  # rad/pu
    zv: np.ndarray  # rad
    tail_bound: float = 0.0
    quadrature_error: float = 0.0
    horizon: float = 0.0  # s
    step: float = 0.0  # s
    output_labels: tuple[str, ...] = ()
    input_labels: tuple[str, ...] = ()
    line_labels: tuple[str, ...] = ()
    elapsed: float = 0.0

    @property
    def full(self) -> np.ndarray:
        return np.block([[self.yu, self.yv], [self.zu, self.zv]])

    def to_rows(self) -> list[dict]:
        """One row per channel, in (block, output, input) order."""
        z_labels = [f"z:{label}" for label in self.line_labels]
        v_labels = [f"v:{label}" for label in self.line_labels]
        blocks = (
            ("yu", self.yu, self.output_labels, self.input_labels),
            ("yv", self.yv, self.output_labels, v_labels),
            ("zu", self.zu, z_labels, self.input_labels),
            ("zv", self.zv, z_labels, v_labels),
        )
        rows = []
        for name, matrix, outputs, inputs in blocks:
            for i, output in enumerate(outputs):
                for j, input_ in enumerate(inputs):
                    rows.append({"block": name, "output": output, "input": input_, "gain": float(matrix[i, j])})
        return rows

    def to_dict(self) -> dict:
        return {
            "tail_bound": self.tail_bound,
            "quadrature_error": self.quadrature_error,
            "horizon": self.horizon,
            "step": self.step,
            "elapsed": self.elapsed,
            "shape": {"yu": self.yu.shape, "yv": self.yv.shape, "zu": self.zu.shape, "zv": self.zv.shape},
        }


@dataclass(frozen=True)
class SectorGain:
    diag: np.ndarray
    zbar: np.ndarray  # rad
    method: str = "corollary"

    @property
    def matrix(self) -> np.ndarray:
        return np.diag(self.diag)


@dataclass
class _StableSubspace:
    Q: np.ndarray  # orthonormal basis of the A-invariant complement of the shift mode
    A_r: np.ndarray
    P_s: np.ndarray  # projector onto range(Q) along the shift mode


def _stable_subspace(A: np.ndarray, zero_mode: Optional[np.ndarray]) -> _StableSubspace:
    dim = A.shape[0]
    if zero_mode is None:
        Q, P_s = np.eye(dim), np.eye(dim)
    else:
        # left null vector normalized so that w0 . v0 = 1
        lhs = np.vstack([A.T, zero_mode[None, :]])
        rhs = np.zeros(dim + 1)
        rhs[-1] = 1.0
        w0 = np.linalg.lstsq(lhs, rhs, rcond=None)[0]
        P_s = np.eye(dim) - np.outer(zero_mode, w0)
        Q = scipy.linalg.null_space(w0[None, :])
    A_r = Q.T @ A @ Q
    return _StableSubspace(Q=Q, A_r=A_r, P_s=P_s)


def _envelope(space: _StableSubspace) -> float:
    """Constant c with int_T^inf |xi(t)| dt <= c |xi(T)| for xi' = A_r xi."""
    if space.A_r.size == 0:
        return 0.0
    try:
        P = scipy.linalg.solve_continuous_lyapunov(space.A_r.T, -np.eye(space.A_r.shape[0]))
    except (ValueError, np.linalg.LinAlgError, scipy.linalg.LinAlgError) as e:
        raise GainComputationError(f"Lyapunov envelope failed: {e}") from e
    P = 0.5 * (P + P.T)
    eigs = np.linalg.eigvalsh(P)
    if not np.all(np.isfinite(eigs)) or eigs[0] <= 0:
        raise GainComputationError("Impulse response does not decay: no quadratic envelope on the stable subspace")
    return math.sqrt(eigs[-1] / eigs[0]) * 2.0 * eigs[-1]


def _rk4_propagator(A: np.ndarray, h: float) -> np.ndarray:
    hA = h * A
    term = np.eye(A.shape[0])
    prop = term.copy()
    for k in range(1, 5):
        term = term @ hA / k
        prop = prop + term
    return prop


def _abs_trapezoid(Y: np.ndarray, h: float) -> np.ndarray:
    """Integral of |y| over samples along axis 0, exact for the piecewise-linear interpolant."""
    a, b = Y[:-1], Y[1:]
    abs_a, abs_b = np.abs(a), np.abs(b)
    total = abs_a + abs_b
    crossing = a * b < 0
    safe = np.where(total > 0, total, 1.0)
    pieces = np.where(crossing, (a * a + b * b) / (2.0 * safe), 0.5 * total)
    return h * pieces.sum(axis=0)


def _integrate_columns(task: Task) -> dict:
    """Task handler: L1 integrals of C exp(At) X for a batch of initial columns."""
    params = task.params
    prop, C, X, h = params["propagator"], params["C"], params["X"].copy(), params["h"]
    rel_tol, row_norms, tail_factor = params["rel_tol"], params["row_norms"], params["tail_factor"]
    chunk, max_steps = params["chunk"], params["max_steps"]
    reporter = ProgressReporter(task)

    p, k = C.shape[0], X.shape[1]
    I_h = np.zeros((p, k))
    I_2h = np.zeros((p, k))
    y_prev = C @ X
    peak = np.linalg.norm(X, axis=0)
    steps = 0
    Y = np.empty((chunk + 1, p, k))
    while True:
        Y[0] = y_prev
        for s in range(chunk):
            X = prop @ X
            Y[s + 1] = C @ X
            peak = np.maximum(peak, np.linalg.norm(X, axis=0))
        I_h += _abs_trapezoid(Y, h)
        I_2h += _abs_trapezoid(Y[::2], 2.0 * h)
        y_prev = Y[-1].copy()
        steps += chunk

        x_norm = np.linalg.norm(X, axis=0)
        if not np.all(np.isfinite(x_norm)):
            raise GainComputationError(f"Impulse response diverged after {steps} steps")
        tail = tail_factor * np.outer(row_norms, x_norm)
        decayed = x_norm <= rel_tol * peak
        closed = tail.max(axis=0, initial=0.0) <= rel_tol * I_h.max(axis=0, initial=0.0)
        if np.all(decayed & closed):
            break
        if steps >= max_steps:
            raise GainComputationError(f"Impulse response did not decay within {max_steps} steps ({steps * h:.1f} s)")
        reporter.update(100.0 * float(np.mean(decayed)), f"t = {steps * h:.2f} s")

    return {"integral": I_h, "error": np.abs(I_h - I_2h) / 3.0, "tail": tail, "steps": steps}


TaskManager.get_instance().register_handler("gain_columns", _integrate_columns)


def l1_gains(
    A: np.ndarray,
    B: np.ndarray,
    C: np.ndarray,
    zero_mode: Optional[np.ndarray] = None,
    rel_tol: Optional[float] = None,
) -> tuple[np.ndarray, dict]:
    """Upper bounds on int_0^inf |C exp(At) B| dt, entry by entry.

    zero_mode, when given, is a right null vector of A annihilated by C; the
    integration then runs on the complementary invariant subspace.
    """
    rel_tol = config.GAIN_REL_TOL if rel_tol is None else rel_tol
    chunk = config.GAIN_CHUNK_STEPS + config.GAIN_CHUNK_STEPS % 2
    if zero_mode is not None and np.max(np.abs(C @ zero_mode), initial=0.0) > config.EIG_TOL:
        raise GainComputationError("Outputs see the uniform angle shift; the impulse response cannot decay")

    space = _stable_subspace(A, zero_mode)
    tail_factor = _envelope(space)
    lam_max = float(np.max(np.abs(np.linalg.eigvals(A)), initial=0.0))
    h = config.GAIN_MAX_STEP if lam_max == 0 else min(config.GAIN_STEP_FACTOR / lam_max, config.GAIN_MAX_STEP)
    X0 = space.P_s @ B
    row_norms = np.linalg.norm(C @ space.Q, axis=1)
    batches = split_batches(B.shape[1], config.GAIN_BATCH_COLUMNS)

    for refinement in range(config.GAIN_MAX_REFINE + 1):
        prop = _rk4_propagator(A, h)
        params_list = [
            {
                "propagator": prop,
                "C": C,
                "X": X0[:, cols],
                "h": h,
                "rel_tol": rel_tol,
                "row_norms": row_norms,
                "tail_factor": tail_factor,
                "chunk": chunk,
                "max_steps": config.GAIN_MAX_STEPS,
            }
            for cols in batches
        ]
        results = TaskManager.get_instance().run_batch("gain_columns", params_list)
        integral = np.hstack([r["integral"] for r in results])
        error = np.hstack([r["error"] for r in results])
        # entries far below the largest gain are held to an absolute floor instead
        allowed = rel_tol * np.maximum(integral, config.GAIN_ENTRY_FLOOR * integral.max(initial=0.0))
        if np.all(error <= allowed):
            break
        if refinement == config.GAIN_MAX_REFINE:
            utils.print_warning(f"Gain quadrature error {error.max():.2e} still above tolerance at h = {h:.2e} s; keeping it in the bound")
            break
        utils.print_debug(f"Gain quadrature error {error.max():.2e} above tolerance, halving h = {h:.2e} s")
        h /= 2.0

    tail = np.hstack([r["tail"] for r in results])
    steps = max(r["steps"] for r in results)
    info = {
        "tail_bound": float(tail.max(initial=0.0)),
        "quadrature_error": float(error.max(initial=0.0)),
        "horizon": steps * h,
        "step": h,
    }
    return integral + error + tail, info


def linear_gains(sys: LureSystem, rel_tol: Optional[float] = None) -> GainMatrices:
    """Gain matrices of the four transfer blocks G_{y,u}, G_{y,v}, G_{z,u}, G_{z,v}."""
    start = time.time()
    B = np.hstack([sys.B_u, sys.B_v])
    C = np.vstack([HZ_PER_RAD_S * sys.C_y, sys.C_z])
    gains, info = l1_gains(sys.A, B, C, sys.zero_mode, rel_tol)
    m, n_u = sys.m, sys.input_dim
    elapsed = time.time() - start
    utils.print_info(
        f"Linear gains ready: {C.shape[0]}x{B.shape[1]} channels, horizon {info['horizon']:.1f} s, "
        f"h = {info['step']:.2e} s, tail bound {info['tail_bound']:.2e}"
    )
    return GainMatrices(
        yu=gains[:m, :n_u],
        yv=gains[:m, n_u:],
        zu=gains[m:, :n_u],
        zv=gains[m:, n_u:],
        output_labels=sys.output_labels,
        input_labels=sys.input_labels,
        line_labels=sys.line_labels,
        elapsed=elapsed,
        **info,
    )


def dc_gains(sys: LureSystem) -> GainMatrices:
    """|G(0)| for every channel, computed on the subspace without the shift mode."""
    B = np.hstack([sys.B_u, sys.B_v])
    C = np.vstack([HZ_PER_RAD_S * sys.C_y, sys.C_z])
    space = _stable_subspace(sys.A, sys.zero_mode)
    dc = -C @ space.Q @ np.linalg.solve(space.A_r, space.Q.T @ space.P_s @ B)
    dc = np.abs(dc)
    m, n_u = sys.m, sys.input_dim
    return GainMatrices(
        yu=dc[:m, :n_u],
        yv=dc[:m, n_u:],
        zu=dc[m:, :n_u],
        zv=dc[m:, n_u:],
        output_labels=sys.output_labels,
        input_labels=sys.input_labels,
        line_labels=sys.line_labels,
    )


def sector_quotient(phi_star: ArrayLike, z: ArrayLike) -> np.ndarray:
    """(sin(phi* + z) - sin phi*) / z - cos phi*, continuous at z = 0."""
    phi_star = np.asarray(phi_star, dtype=float)
    z = np.asarray(z, dtype=float)
    return np.cos(phi_star) * (np.sinc(z / math.pi) - 1.0) - np.sin(phi_star) * np.sin(z / 2.0) * np.sinc(z / (2.0 * math.pi))


def sector_gain_exact(phi_star_i: float, zbar_i: float) -> float:
    """sup over |z| <= zbar of |sector_quotient|, by dense grid plus bounded polish."""
    if zbar_i < 0:
        raise HypothesisError(f"zbar must be nonnegative, got {zbar_i}")
    if zbar_i == 0:
        return 0.0

    def objective(z):
        return -abs(float(sector_quotient(phi_star_i, z)))

    grid = np.linspace(-zbar_i, zbar_i, 2001)
    values = np.abs(sector_quotient(phi_star_i, grid))
    best = int(np.argmax(values))
    candidates = [values[0], values[-1], values[best]]
    lo, hi = grid[max(best - 1, 0)], grid[min(best + 1, grid.size - 1)]
    if hi > lo:
        res = minimize_scalar(objective, bounds=(lo, hi), method="bounded", options={"xatol": 1e-13})
        candidates.append(-float(res.fun))
    return float(max(candidates))


def _check_hypotheses(a: np.ndarray, zbar: np.ndarray):
    if np.any(zbar < 0):
        raise HypothesisError(f"zbar must be nonnegative, got {zbar}")
    if np.any(a > math.pi / 2 + 1e-12):
        raise HypothesisError(f"|phi*| = {a.max():.6g} exceeds pi/2")
    if np.any(a + zbar > math.pi + 1e-12):
        i = int(np.argmax(a + zbar))
        raise HypothesisError(f"|phi*| + zbar = {(a + zbar).flat[i]:.6g} exceeds pi; shrink zbar")


def sector_gain_corollary(phi_star_i: ArrayLike, zbar_i: ArrayLike) -> ArrayLike:
    """cos|phi*| - (sin(|phi*| + zbar) - sin|phi*|) / zbar, an upper bound on the exact sector gain."""
    scalar = np.isscalar(phi_star_i) and np.isscalar(zbar_i)
    a = np.abs(np.asarray(phi_star_i, dtype=float))
    zbar = np.asarray(zbar_i, dtype=float)
    _check_hypotheses(a, zbar)
    value = -sector_quotient(a, zbar)
    return float(value) if scalar else value


def sector_weight(phi_star: np.ndarray, zbar: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """w(zbar) = gamma_psi(zbar) * zbar with its first and second derivatives (all elementwise)."""
    a = np.abs(np.asarray(phi_star, dtype=float))
    zbar = np.asarray(zbar, dtype=float)
    _check_hypotheses(a, zbar)
    w = zbar * np.cos(a) - np.sin(a + zbar) + np.sin(a)
    return w, np.cos(a) - np.cos(a + zbar), np.sin(a + zbar)


def sector_gain(phi_star: np.ndarray, zbar: np.ndarray, method: str = "corollary") -> SectorGain:
    phi_star = np.asarray(phi_star, dtype=float)
    zbar = np.broadcast_to(np.asarray(zbar, dtype=float), phi_star.shape).copy()
    if method == "corollary":
        diag = np.asarray(sector_gain_corollary(phi_star, zbar), dtype=float)
    elif method == "exact":
        diag = np.array([sector_gain_exact(p, z) for p, z in zip(phi_star, zbar)])
    else:
        raise ValueError(f"Unknown sector gain method: {method}")
    return SectorGain(diag=diag.reshape(phi_star.shape), zbar=zbar, method=method)
