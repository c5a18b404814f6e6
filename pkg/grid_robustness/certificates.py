"""Small-gain certificates: M-matrix checks and the BIBO / CIBO / CICO predicates.

All certificates assume the grid starts at its equilibrium (x0 = 0).
"""

from dataclasses import dataclass
from typing import NamedTuple, Optional, Union

import numpy as np

from . import config, utils
from .errors import ProblemError
from .gain import GainMatrices, SectorGain, sector_gain_corollary


class MMatrixChecks(NamedTuple):
    rho: float
    inverse_positive: bool
    positive_vector: Optional[np.ndarray]


@dataclass(frozen=True)
class SmallGainResult:
    ok: bool
    spectral_radius: float
    closed_loop_gain: Optional[np.ndarray] = None  # gamma_H, Hz/pu

    def __bool__(self) -> bool:
        return self.ok


@dataclass(frozen=True)
class CertificateResult:
    ubar: np.ndarray  # pu
    zbar: np.ndarray  # rad
    ybar: np.ndarray  # Hz, inf disables the frequency condition
    bibo_ok: bool
    cibo_ok: bool
    cico_ok: bool
    spectral_radius: float
    margins_z: np.ndarray  # rad
    margins_y: np.ndarray  # Hz

    @property
    def margins(self) -> dict:
        return {"z": self.margins_z, "y": self.margins_y}

    def to_dict(self) -> dict:
        return {
            "ubar": self.ubar,
            "zbar": self.zbar,
            "ybar": self.ybar,
            "bibo_ok": self.bibo_ok,
            "cibo_ok": self.cibo_ok,
            "cico_ok": self.cico_ok,
            "spectral_radius": self.spectral_radius,
            "margins": self.margins,
        }


def spectral_radius(Z: np.ndarray) -> float:
    """Perron root of a nonnegative matrix by power iteration on Z + I with Collatz-Wielandt bounds."""
    Z = np.asarray(Z, dtype=float)
    if Z.size == 0:
        return 0.0
    shifted = Z + np.eye(Z.shape[0])
    x = np.ones(Z.shape[0])
    lower, upper = 1.0, np.inf
    for _ in range(config.POWER_ITER_MAX):
        y = shifted @ x
        ratios = y / x
        lower, upper = float(ratios.min()), float(ratios.max())
        if upper - lower <= config.POWER_ITER_TOL * upper:
            return max(0.5 * (lower + upper) - 1.0, 0.0)
        x = y / y.max()
    utils.print_debug(f"Power iteration stalled with bounds [{lower - 1:.3e}, {upper - 1:.3e}], using eigvals")
    return float(np.max(np.abs(np.linalg.eigvals(Z))))


def mmatrix_checks(Z: np.ndarray) -> MMatrixChecks:
    """Evaluate rho(Z) < 1, (I - Z)^-1 >= 0 and the existence of x >= 0 with (I - Z) x > 0."""
    Z = np.asarray(Z, dtype=float)
    if np.any(Z < 0):
        raise ValueError("mmatrix_checks expects an entrywise nonnegative matrix")
    rho = spectral_radius(Z)
    I_minus_Z = np.eye(Z.shape[0]) - Z
    try:
        inverse = np.linalg.inv(I_minus_Z)
    except np.linalg.LinAlgError:
        return MMatrixChecks(rho, False, None)
    scale = float(np.max(np.abs(inverse), initial=0.0))
    inverse_positive = bool(np.all(inverse >= -config.INVERSE_SIGN_TOL * scale))

    x = inverse @ np.ones(Z.shape[0])
    positive_vector = None
    if np.all(x >= 0) and np.all(I_minus_Z @ x > 0):
        positive_vector = x
    return MMatrixChecks(rho, inverse_positive, positive_vector)


def _loop_matrix(g: GainMatrices, psi: Union[SectorGain, np.ndarray]) -> np.ndarray:
    diag = psi.diag if isinstance(psi, SectorGain) else np.asarray(psi, dtype=float)
    return g.zv * diag[None, :]


def check_bibo(g: GainMatrices, psi: Union[SectorGain, np.ndarray]) -> SmallGainResult:
    """rho(gamma_zv gamma_psi) < 1, with the closed-loop gain gamma_H when it holds."""
    Z = _loop_matrix(g, psi)
    rho = spectral_radius(Z)
    if rho >= 1:
        return SmallGainResult(False, rho)
    diag = psi.diag if isinstance(psi, SectorGain) else np.asarray(psi, dtype=float)
    gamma_H = g.yu + (g.yv * diag[None, :]) @ np.linalg.solve(np.eye(Z.shape[0]) - Z, g.zu)
    return SmallGainResult(True, rho, gamma_H)


def _validate(ubar: np.ndarray, zbar: np.ndarray, g: GainMatrices):
    if ubar.shape != (g.zu.shape[1],):
        raise ProblemError(f"ubar has shape {ubar.shape}, expected ({g.zu.shape[1]},)")
    if zbar.shape != (g.zv.shape[0],):
        raise ProblemError(f"zbar has shape {zbar.shape}, expected ({g.zv.shape[0]},)")
    if np.any(ubar < 0) or not np.all(np.isfinite(ubar)):
        raise ProblemError("ubar must be finite and nonnegative")


def _z_margins(g: GainMatrices, phi_star: np.ndarray, ubar: np.ndarray, zbar: np.ndarray) -> tuple[np.ndarray, float]:
    psi = np.asarray(sector_gain_corollary(phi_star, zbar), dtype=float)
    margins = zbar - g.zv @ (psi * zbar) - g.zu @ ubar
    return margins, spectral_radius(_loop_matrix(g, psi))


def check_cibo(g: GainMatrices, phi_star: np.ndarray, ubar: np.ndarray, zbar: np.ndarray) -> tuple[bool, np.ndarray]:
    """Row-wise gamma_zu ubar < (I - gamma_zv gamma_psi(zbar)) zbar, strictness enforced as margin >= EPS_STRICT."""
    ubar = np.asarray(ubar, dtype=float)
    zbar = np.asarray(zbar, dtype=float)
    _validate(ubar, zbar, g)
    margins, rho = _z_margins(g, phi_star, ubar, zbar)
    ok = bool(np.all(margins >= config.EPS_STRICT) and rho < 1)
    return ok, margins


def check_cico(g: GainMatrices, phi_star: np.ndarray, ubar: np.ndarray, zbar: np.ndarray, ybar) -> CertificateResult:
    """CIBO plus gamma_yu ubar + gamma_yv gamma_psi(zbar) zbar <= ybar; ybar = inf disables the second condition."""
    ubar = np.asarray(ubar, dtype=float)
    zbar = np.asarray(zbar, dtype=float)
    _validate(ubar, zbar, g)
    ybar = np.broadcast_to(np.asarray(ybar, dtype=float), (g.yu.shape[0],)).copy()
    if np.any(np.isnan(ybar)) or np.any(ybar <= 0):
        raise ProblemError("ybar must be positive (use inf to disable the frequency limit)")

    margins_z, rho = _z_margins(g, phi_star, ubar, zbar)
    psi = np.asarray(sector_gain_corollary(phi_star, zbar), dtype=float)
    with np.errstate(invalid="ignore"):
        margins_y = ybar - g.yu @ ubar - g.yv @ (psi * zbar)

    bibo_ok = rho < 1
    cibo_ok = bool(np.all(margins_z >= config.EPS_STRICT) and bibo_ok)
    cico_ok = bool(cibo_ok and np.all(margins_y >= 0))
    return CertificateResult(
        ubar=ubar,
        zbar=zbar,
        ybar=ybar,
        bibo_ok=bool(bibo_ok),
        cibo_ok=cibo_ok,
        cico_ok=cico_ok,
        spectral_radius=rho,
        margins_z=margins_z,
        margins_y=margins_y,
    )
