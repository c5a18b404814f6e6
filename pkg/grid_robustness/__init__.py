"""Certified disturbance bounds for power grids via Lur'e small-gain certificates."""

from .network import Bus, Line, Generator, Load, GridCase, Equilibrium, parse_grid, case_from_dict, build_case, smib_case, solve_equilibrium
from .lure import LureSystem, build_lure, nonlinearity, dump_matrices
from .gain import GainMatrices, SectorGain, linear_gains, dc_gains, sector_gain, sector_gain_exact, sector_gain_corollary
from .certificates import CertificateResult, SmallGainResult, mmatrix_checks, spectral_radius, check_bibo, check_cibo, check_cico
from .optimizer import OptProblem, OptSolution, SweepPoint, max_disturbance, sweep_zbar, constraint_margins
from .disturbance import Disturbance, tripping_scenario, wind_scenario, step_family, random_family
from .simulator import SwingDynamics, IntegratorSettings, Trajectory, LimitSpec, simulate, run_scenarios, empirical_upper_bound

__version__ = "0.1.0"

__all__ = [
    'Bus',
    'Line',
    'Generator',
    'Load',
    'GridCase',
    'Equilibrium',
    'parse_grid',
    'case_from_dict',
    'build_case',
    'smib_case',
    'solve_equilibrium',
    'LureSystem',
    'build_lure',
    'nonlinearity',
    'dump_matrices',
    'GainMatrices',
    'SectorGain',
    'linear_gains',
    'dc_gains',
    'sector_gain',
    'sector_gain_exact',
    'sector_gain_corollary',
    'CertificateResult',
    'SmallGainResult',
    'mmatrix_checks',
    'spectral_radius',
    'check_bibo',
    'check_cibo',
    'check_cico',
    'OptProblem',
    'OptSolution',
    'SweepPoint',
    'max_disturbance',
    'sweep_zbar',
    'constraint_margins',
    'Disturbance',
    'tripping_scenario',
    'wind_scenario',
    'step_family',
    'random_family',
    'SwingDynamics',
    'IntegratorSettings',
    'Trajectory',
    'LimitSpec',
    'simulate',
    'run_scenarios',
    'empirical_upper_bound',
]
