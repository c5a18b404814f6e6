"""Lur'e form of the linearized swing/governor model.

    x' = A x + B_v v + B_u u,   y = C_y x,   z = C_z x,
    v  = sin(phi* + z) - sin(phi*) - diag(cos phi*) z

with x = [x1 (generator angles), x2 (generator frequencies), x3 (load angles),
x4 (governor powers)], all measured from the equilibrium. Only generators with
T > 0 carry an x4 state and the infinite bus carries no state at all.
"""

import math
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import config, utils
from .errors import SmallSignalInstabilityError
from .network import Equilibrium, GridCase

HZ_PER_RAD_S = 1.0 / (2.0 * math.pi)


@dataclass(frozen=True)
class LureSystem:
    A: np.ndarray
    B_v: np.ndarray
    B_u: np.ndarray
    C_y: np.ndarray  # rad/s; scale by HZ_PER_RAD_S for Hz
    C_z: np.ndarray
    phi_star: np.ndarray
    m: int
    n: int  # load buses carrying a state
    ell: int
    zero_mode: Optional[np.ndarray] = None  # right null vector of A, None with an infinite bus
    state_labels: tuple[str, ...] = ()
    input_labels: tuple[str, ...] = ()
    output_labels: tuple[str, ...] = ()
    line_labels: tuple[str, ...] = ()
    gen_ids: tuple[int, ...] = ()
    load_ids: tuple[int, ...] = ()
    eigenvalues: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def state_dim(self) -> int:
        return self.A.shape[0]

    @property
    def input_dim(self) -> int:
        return self.B_u.shape[1]


def nonlinearity(phi_star: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Remainder of the first-order expansion of the line flows around phi*."""
    phi_star = np.asarray(phi_star, dtype=float)
    z = np.asarray(z, dtype=float)
    if phi_star.shape[-1] != z.shape[-1]:
        raise ValueError(f"phi_star has {phi_star.shape[-1]} lines but z has {z.shape[-1]}")
    return np.sin(phi_star + z) - np.sin(phi_star) - np.cos(phi_star) * z


def build_lure(case: GridCase, eq: Equilibrium) -> LureSystem:
    """Assemble (A, B_v, B_u, C_y, C_z) and verify the small-signal structure."""
    gen_ids = case.generator_ids
    load_ids = case.dynamic_load_ids
    m, n, ell = len(gen_ids), len(load_ids), case.ell
    index = case.bus_index
    governed = [i for i, bus_id in enumerate(gen_ids) if case.generators[bus_id].has_governor]
    g = len(governed)

    E = case.incidence()
    E_G = E[[index[b] for b in gen_ids], :]
    E_L = E[[index[b] for b in load_ids], :] if n else np.zeros((0, ell))
    Phi = np.diag(case.phi)
    Phi_c = Phi @ np.diag(np.cos(eq.phi_star))

    gens = [case.generators[b] for b in gen_ids]
    M_inv = np.diag([1.0 / gen.M for gen in gens])
    D_G = np.diag([gen.D for gen in gens])
    D_L_inv = np.diag([1.0 / case.loads[b].D for b in load_ids]) if n else np.zeros((0, 0))
    T_inv = np.diag([1.0 / gens[i].T for i in governed]) if g else np.zeros((0, 0))
    R_inv = np.diag([1.0 / gens[i].R for i in governed]) if g else np.zeros((0, 0))
    S = np.zeros((m, g))
    for j, i in enumerate(governed):
        S[i, j] = 1.0

    s1, s2, s3, s4 = slice(0, m), slice(m, 2 * m), slice(2 * m, 2 * m + n), slice(2 * m + n, 2 * m + n + g)
    dim = 2 * m + n + g

    A = np.zeros((dim, dim))
    A[s1, s2] = np.eye(m)
    A[s2, s1] = -M_inv @ E_G @ Phi_c @ E_G.T
    A[s2, s2] = -M_inv @ D_G
    A[s2, s3] = -M_inv @ E_G @ Phi_c @ E_L.T
    A[s2, s4] = M_inv @ S
    A[s3, s1] = -D_L_inv @ E_L @ Phi_c @ E_G.T
    A[s3, s3] = -D_L_inv @ E_L @ Phi_c @ E_L.T
    A[s4, s2] = -T_inv @ R_inv @ S.T
    A[s4, s4] = -T_inv

    B_v = np.zeros((dim, ell))
    B_v[s2, :] = -M_inv @ E_G @ Phi
    B_v[s3, :] = -D_L_inv @ E_L @ Phi

    B_u = np.zeros((dim, m + n))
    for i, gen in enumerate(gens):
        if case.injection == "governor" and gen.has_governor:
            B_u[2 * m + n + governed.index(i), i] = 1.0 / gen.T
        else:
            B_u[m + i, i] = 1.0 / gen.M
    for j in range(n):
        B_u[2 * m + j, m + j] = D_L_inv[j, j]

    C_y = np.zeros((m, dim))
    C_y[:, s2] = np.eye(m)
    C_z = np.zeros((ell, dim))
    C_z[:, s1] = E_G.T
    C_z[:, s3] = E_L.T

    zero_mode = None
    if case.infinite_bus is None:
        zero_mode = np.zeros(dim)
        zero_mode[s1] = 1.0
        zero_mode[s3] = 1.0

    eigenvalues = _check_small_signal(A, C_y, C_z, zero_mode)

    state_labels = [f"delta:{b}" for b in gen_ids] + [f"omega:{b}" for b in gen_ids]
    state_labels += [f"delta:{b}" for b in load_ids] + [f"p:{gen_ids[i]}" for i in governed]
    return LureSystem(
        A=A,
        B_v=B_v,
        B_u=B_u,
        C_y=C_y,
        C_z=C_z,
        phi_star=np.asarray(eq.phi_star, dtype=float).copy(),
        m=m,
        n=n,
        ell=ell,
        zero_mode=zero_mode,
        state_labels=tuple(state_labels),
        input_labels=tuple([f"u_G:{b}" for b in gen_ids] + [f"u_L:{b}" for b in load_ids]),
        output_labels=tuple(f"y:{b}" for b in gen_ids),
        line_labels=tuple(case.line_labels),
        gen_ids=tuple(gen_ids),
        load_ids=tuple(load_ids),
        eigenvalues=eigenvalues,
    )


def _check_small_signal(A: np.ndarray, C_y: np.ndarray, C_z: np.ndarray, zero_mode: Optional[np.ndarray]) -> np.ndarray:
    eigenvalues = np.linalg.eigvals(A)
    rest = eigenvalues
    if zero_mode is not None:
        if np.max(np.abs(A @ zero_mode)) > config.EIG_TOL:
            raise SmallSignalInstabilityError(0.0, "uniform angle shift is not in the null space of A")
        if np.max(np.abs(C_y @ zero_mode), initial=0.0) > 0 or np.max(np.abs(C_z @ zero_mode), initial=0.0) > 0:
            raise SmallSignalInstabilityError(0.0, "outputs do not annihilate the uniform angle shift")
        # the structural zero is exact in theory; drop the eigenvalue nearest to it
        rest = np.delete(eigenvalues, int(np.argmin(np.abs(eigenvalues))))
    if rest.size:
        worst = rest[int(np.argmax(rest.real))]
        if worst.real >= -config.EIG_TOL:
            raise SmallSignalInstabilityError(complex(worst))
    utils.print_debug(f"Small-signal check passed, slowest mode {rest.real.max() if rest.size else float('nan'):.4g}")
    return eigenvalues


def dump_matrices(sys: LureSystem, out_dir: str) -> list[str]:
    """Write A, B_v, B_u, C_y and C_z as CSV files with labelled header rows."""
    os.makedirs(out_dir, exist_ok=True)
    v_labels = [f"v:{label}" for label in sys.line_labels]
    z_labels = [f"z:{label}" for label in sys.line_labels]
    tables = {
        "A": (sys.A, sys.state_labels, sys.state_labels),
        "B_v": (sys.B_v, sys.state_labels, v_labels),
        "B_u": (sys.B_u, sys.state_labels, sys.input_labels),
        "C_y": (sys.C_y, sys.output_labels, sys.state_labels),
        "C_z": (sys.C_z, z_labels, sys.state_labels),
    }
    paths = []
    for name, (matrix, rows, cols) in tables.items():
        path = utils.join_path(out_dir, f"{name}.csv")
        records = [{"row": row, **dict(zip(cols, values))} for row, values in zip(rows, matrix)]
        utils.save_table(path, records, columns=["row", *cols])
        paths.append(path)
    return paths
