"""Grid data model, case-file parsing and the lossless power-flow equilibrium.

Buses are stored generators first (in file order), then load buses, with the
infinite bus (if any) last. Power is per-unit, angles radians, time seconds.
P_L is the net injection at a load bus, so consumption is negative.
"""

import math
import os
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Any, Iterable, Mapping, Optional

import networkx as nx
import numpy as np

from . import config, utils
from .errors import CaseFormatError, EquilibriumError

GEN = "gen"
LOAD = "load"
INJECTION_STYLES = ("governor", "swing")


@dataclass(frozen=True)
class Bus:
    id: int
    kind: str


@dataclass(frozen=True)
class Line:
    from_bus: int
    to_bus: int
    phi: float  # b_kj * V_k * V_j

    @property
    def label(self) -> str:
        return f"{self.from_bus}-{self.to_bus}"


@dataclass(frozen=True)
class Generator:
    M: float
    D: float
    T: float
    R: float
    Pg: float

    @property
    def has_governor(self) -> bool:
        return self.T > 0


@dataclass(frozen=True)
class Load:
    D: float
    Pl: float


@dataclass(frozen=True)
class GridCase:
    """Static network description with generators ordered before loads."""
    buses: tuple[Bus, ...]
    lines: tuple[Line, ...]
    generators: Mapping[int, Generator]
    loads: Mapping[int, Load]
    permutation: tuple[int, ...] = ()  # permutation[i] = position in the source of bus i
    infinite_bus: Optional[int] = None
    injection: str = "governor"
    name: str = ""
    base_mva: float = 100.0

    @property
    def m(self) -> int:
        return sum(1 for bus in self.buses if bus.kind == GEN)

    @property
    def n(self) -> int:
        return sum(1 for bus in self.buses if bus.kind == LOAD)

    @property
    def ell(self) -> int:
        return len(self.lines)

    @property
    def generator_ids(self) -> list[int]:
        return [bus.id for bus in self.buses if bus.kind == GEN]

    @property
    def load_ids(self) -> list[int]:
        return [bus.id for bus in self.buses if bus.kind == LOAD]

    @property
    def dynamic_load_ids(self) -> list[int]:
        """Load buses carrying a state (every load bus except the infinite bus)."""
        return [bus_id for bus_id in self.load_ids if bus_id != self.infinite_bus]

    @property
    def bus_index(self) -> dict[int, int]:
        return {bus.id: i for i, bus in enumerate(self.buses)}

    @property
    def line_labels(self) -> list[str]:
        return [line.label for line in self.lines]

    @property
    def phi(self) -> np.ndarray:
        return np.array([line.phi for line in self.lines], dtype=float)

    def incidence(self) -> np.ndarray:
        """Node-by-line incidence matrix E, +1 at the from bus and -1 at the to bus."""
        index = self.bus_index
        E = np.zeros((len(self.buses), self.ell))
        for k, line in enumerate(self.lines):
            E[index[line.from_bus], k] = 1.0
            E[index[line.to_bus], k] = -1.0
        return E

    def injections(self) -> np.ndarray:
        """Scheduled net injection per bus (P_G at generators, P_L at loads, 0 at the infinite bus)."""
        P = np.zeros(len(self.buses))
        for i, bus in enumerate(self.buses):
            if bus.kind == GEN:
                P[i] = self.generators[bus.id].Pg
            elif bus.id != self.infinite_bus:
                P[i] = self.loads[bus.id].Pl
        return P

    def graph(self) -> nx.Graph:
        graph = nx.Graph()
        graph.add_nodes_from(bus.id for bus in self.buses)
        graph.add_edges_from((line.from_bus, line.to_bus) for line in self.lines)
        return graph

    def degree(self, bus_id: int) -> int:
        return self.graph().degree[bus_id]


@dataclass(frozen=True)
class Equilibrium:
    delta_star: np.ndarray  # rad, one per bus, reference bus at 0
    p_star: np.ndarray  # pu, one per generator
    phi_star: np.ndarray  # rad, E^T delta*
    slack_adjustment: float = 0.0  # pu added to the first generator's Pg
    iterations: int = 0
    residual: float = 0.0

    def to_dict(self) -> dict:
        return {
            "delta_star": self.delta_star,
            "p_star": self.p_star,
            "phi_star": self.phi_star,
            "slack_adjustment": self.slack_adjustment,
            "iterations": self.iterations,
            "residual": self.residual,
        }


def _require_number(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise CaseFormatError(path, f"expected a finite number, got {value!r}")
    return float(value)


def _require_positive(value: Any, path: str, what: str = "parameter") -> float:
    number = _require_number(value, path)
    if number <= 0:
        raise CaseFormatError(path, f"nonpositive {what} ({number})")
    return number


def _require_int(value: Any, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise CaseFormatError(path, f"expected an integer, got {value!r}")
    return value


def build_case(
    buses: Iterable[Bus],
    lines: Iterable[Line],
    generators: Mapping[int, Generator],
    loads: Mapping[int, Load],
    infinite_bus: Optional[int] = None,
    injection: str = "governor",
    name: str = "",
    base_mva: float = 100.0,
) -> GridCase:
    """Validate the pieces of a case and return it reordered generators-first."""
    buses = list(buses)
    lines = list(lines)
    if injection not in INJECTION_STYLES:
        raise CaseFormatError("injection", f"expected one of {INJECTION_STYLES}, got {injection!r}")

    seen: set[int] = set()
    for i, bus in enumerate(buses):
        if bus.kind not in (GEN, LOAD):
            raise CaseFormatError(f"buses[{i}].kind", f"expected 'gen' or 'load', got {bus.kind!r}")
        if bus.id in seen:
            raise CaseFormatError(f"buses[{i}].id", f"duplicate bus id {bus.id}")
        seen.add(bus.id)
    kinds = {bus.id: bus.kind for bus in buses}
    if not any(kind == GEN for kind in kinds.values()):
        raise CaseFormatError("buses", "at least one generator bus is required")

    if infinite_bus is not None:
        if infinite_bus not in kinds:
            raise CaseFormatError("infinite_bus", f"unknown bus {infinite_bus}")
        if kinds[infinite_bus] != LOAD:
            raise CaseFormatError("infinite_bus", f"bus {infinite_bus} must be of kind 'load'")

    pairs: set[frozenset] = set()
    for k, line in enumerate(lines):
        for end, bus_id in (("from", line.from_bus), ("to", line.to_bus)):
            if bus_id not in kinds:
                raise CaseFormatError(f"lines[{k}].{end}", f"unknown bus {bus_id}")
        if line.from_bus == line.to_bus:
            raise CaseFormatError(f"lines[{k}]", f"self-loop at bus {line.from_bus}")
        pair = frozenset((line.from_bus, line.to_bus))
        if pair in pairs:
            raise CaseFormatError(f"lines[{k}]", f"duplicate line {line.from_bus}-{line.to_bus}")
        pairs.add(pair)
        _require_positive(line.phi, f"lines[{k}].phi", "line coefficient")

    for bus_id, kind in kinds.items():
        if kind == GEN:
            if bus_id not in generators:
                raise CaseFormatError(f"generators.{bus_id}", "missing parameters for generator bus")
            gen = generators[bus_id]
            _require_positive(gen.M, f"generators.{bus_id}.M")
            _require_positive(gen.D, f"generators.{bus_id}.D")
            if _require_number(gen.T, f"generators.{bus_id}.T") < 0:
                raise CaseFormatError(f"generators.{bus_id}.T", f"negative governor time constant ({gen.T})")
            # T = 0 bypasses the governor, and the droop is then unused
            if gen.T > 0:
                _require_positive(gen.R, f"generators.{bus_id}.R")
            _require_number(gen.Pg, f"generators.{bus_id}.Pg")
        elif bus_id != infinite_bus:
            if bus_id not in loads:
                raise CaseFormatError(f"loads.{bus_id}", "missing parameters for load bus")
            _require_positive(loads[bus_id].D, f"loads.{bus_id}.D")
            _require_number(loads[bus_id].Pl, f"loads.{bus_id}.Pl")
    for bus_id in generators:
        if kinds.get(bus_id) != GEN:
            raise CaseFormatError(f"generators.{bus_id}", "entry does not refer to a generator bus")
    for bus_id in loads:
        if kinds.get(bus_id) != LOAD:
            raise CaseFormatError(f"loads.{bus_id}", "entry does not refer to a load bus")

    graph = nx.Graph()
    graph.add_nodes_from(kinds)
    graph.add_edges_from((line.from_bus, line.to_bus) for line in lines)
    if not nx.is_connected(graph):
        components = sorted(sorted(c) for c in nx.connected_components(graph))
        raise CaseFormatError("lines", f"graph is disconnected, components: {components}")

    order = [i for i, bus in enumerate(buses) if bus.kind == GEN]
    order += [i for i, bus in enumerate(buses) if bus.kind == LOAD and bus.id != infinite_bus]
    order += [i for i, bus in enumerate(buses) if bus.id == infinite_bus]

    return GridCase(
        buses=tuple(buses[i] for i in order),
        lines=tuple(lines),
        generators=MappingProxyType(dict(generators)),
        loads=MappingProxyType({k: v for k, v in loads.items() if k != infinite_bus}),
        permutation=tuple(order),
        infinite_bus=infinite_bus,
        injection=injection,
        name=name,
        base_mva=base_mva,
    )


def case_from_dict(data: Any, name: str = "") -> GridCase:
    """Build a GridCase from the JSON case schema."""
    if not isinstance(data, dict):
        raise CaseFormatError("$", "top level must be an object")
    for key, kind in (("buses", list), ("lines", list), ("generators", dict), ("loads", dict)):
        if key not in data:
            raise CaseFormatError(key, "missing required field")
        if not isinstance(data[key], kind):
            raise CaseFormatError(key, f"expected {'an array' if kind is list else 'an object'}")

    buses = []
    for i, raw in enumerate(data["buses"]):
        if not isinstance(raw, dict):
            raise CaseFormatError(f"buses[{i}]", "expected an object")
        if "id" not in raw or "kind" not in raw:
            raise CaseFormatError(f"buses[{i}]", "bus requires 'id' and 'kind'")
        buses.append(Bus(_require_int(raw["id"], f"buses[{i}].id"), raw["kind"]))

    lines = []
    for k, raw in enumerate(data["lines"]):
        if not isinstance(raw, dict):
            raise CaseFormatError(f"lines[{k}]", "expected an object")
        for key in ("from", "to", "phi"):
            if key not in raw:
                raise CaseFormatError(f"lines[{k}].{key}", "missing required field")
        lines.append(Line(
            _require_int(raw["from"], f"lines[{k}].from"),
            _require_int(raw["to"], f"lines[{k}].to"),
            _require_number(raw["phi"], f"lines[{k}].phi"),
        ))

    def bus_key(key: str, path: str) -> int:
        try:
            return int(key)
        except ValueError:
            raise CaseFormatError(path, f"key {key!r} is not a bus id") from None

    generators = {}
    for key, raw in data["generators"].items():
        path = f"generators.{key}"
        if not isinstance(raw, dict):
            raise CaseFormatError(path, "expected an object")
        values = {}
        for field_name in ("M", "D", "T", "R", "Pg"):
            if field_name not in raw:
                raise CaseFormatError(f"{path}.{field_name}", "missing required field")
            values[field_name] = _require_number(raw[field_name], f"{path}.{field_name}")
        generators[bus_key(key, path)] = Generator(**values)

    loads = {}
    for key, raw in data["loads"].items():
        path = f"loads.{key}"
        if not isinstance(raw, dict):
            raise CaseFormatError(path, "expected an object")
        values = {}
        for field_name in ("D", "Pl"):
            if field_name not in raw:
                raise CaseFormatError(f"{path}.{field_name}", "missing required field")
            values[field_name] = _require_number(raw[field_name], f"{path}.{field_name}")
        loads[bus_key(key, path)] = Load(**values)

    infinite_bus = data.get("infinite_bus")
    if infinite_bus is not None:
        infinite_bus = _require_int(infinite_bus, "infinite_bus")

    return build_case(
        buses,
        lines,
        generators,
        loads,
        infinite_bus=infinite_bus,
        injection=data.get("injection", "governor"),
        name=str(data.get("name", name)),
        base_mva=_require_positive(data.get("base_mva", 100.0), "base_mva"),
    )


def parse_grid(file_path: str, fmt: str = "json") -> GridCase:
    """Parse a case file into a validated, generators-first GridCase."""
    if fmt != "json":
        raise CaseFormatError("$", f"unsupported case format {fmt!r}")
    if not os.path.exists(file_path):
        raise CaseFormatError("$", f"case file not found: {file_path}")
    try:
        data = utils.load_json(file_path)
    except ValueError as e:
        raise CaseFormatError("$", f"invalid JSON: {e}") from e
    case = case_from_dict(data, name=os.path.splitext(os.path.basename(file_path))[0])
    utils.print_info(f"Parsed case '{case.name}': m={case.m}, n={case.n}, lines={case.ell}")
    return case


def smib_case(M: float = 1.0, D: float = 1.2, p: float = 0.2, phi: float = 0.8, T: float = 0.0, R: float = 0.0) -> GridCase:
    """Single machine against an infinite bus, disturbance applied to the swing equation."""
    return build_case(
        [Bus(1, GEN), Bus(2, LOAD)],
        [Line(1, 2, phi)],
        {1: Generator(M=M, D=D, T=T, R=R, Pg=p)},
        {},
        infinite_bus=2,
        injection="swing",
        name="smib",
    )


def power_mismatch(case: GridCase, delta: np.ndarray, P: np.ndarray) -> np.ndarray:
    """E Phi sin(E^T delta) - P per bus; the infinite bus entry is zeroed."""
    E = case.incidence()
    mismatch = E @ (case.phi * np.sin(E.T @ delta)) - P
    if case.infinite_bus is not None:
        mismatch[case.bus_index[case.infinite_bus]] = 0.0
    return mismatch


def solve_equilibrium(case: GridCase, tol: Optional[float] = None, max_iter: Optional[int] = None) -> Equilibrium:
    """Newton-Raphson on the bus angles with the reference bus eliminated, from a flat start."""
    tol = config.NEWTON_TOL if tol is None else tol
    max_iter = config.NEWTON_MAX_ITER if max_iter is None else max_iter

    P = case.injections()
    slack = 0.0
    if case.infinite_bus is None:
        imbalance = float(P.sum())
        if abs(imbalance) > config.BALANCE_TOL:
            slack = -imbalance
            P[0] += slack
            utils.print_warning(f"Injections unbalanced by {imbalance:.6g} pu; generator {case.buses[0].id} absorbs {slack:.6g} pu")
        ref = 0
    else:
        ref = case.bus_index[case.infinite_bus]

    E = case.incidence()
    phi = case.phi
    free = np.array([i for i in range(len(case.buses)) if i != ref], dtype=int)
    delta = np.zeros(len(case.buses))

    iterations = 0
    for iterations in range(max_iter + 1):
        mismatch = power_mismatch(case, delta, P)
        if np.max(np.abs(mismatch[free]), initial=0.0) <= tol:
            break
        if iterations == max_iter:
            raise EquilibriumError(f"Newton-Raphson did not converge in {max_iter} iterations (mismatch {np.max(np.abs(mismatch)):.3e} pu)")
        laplacian = (E * (phi * np.cos(E.T @ delta))) @ E.T
        try:
            step = np.linalg.solve(laplacian[np.ix_(free, free)], -mismatch[free])
        except np.linalg.LinAlgError as e:
            raise EquilibriumError(f"Singular power-flow Jacobian at iteration {iterations}") from e
        delta[free] += step
        if not np.all(np.isfinite(delta)):
            raise EquilibriumError(f"Newton-Raphson diverged at iteration {iterations}")

    residual = float(np.max(np.abs(power_mismatch(case, delta, P)), initial=0.0))
    if residual > config.EQUILIBRIUM_RESIDUAL_TOL:
        raise EquilibriumError(f"Equilibrium residual {residual:.3e} pu exceeds {config.EQUILIBRIUM_RESIDUAL_TOL:.1e}")

    phi_star = E.T @ delta
    worst = int(np.argmax(np.abs(phi_star))) if case.ell else 0
    if case.ell and abs(phi_star[worst]) > math.pi / 2:
        raise EquilibriumError(f"Line {case.lines[worst].label} has |phi*| = {abs(phi_star[worst]):.4f} rad > pi/2")

    utils.print_debug(f"Equilibrium of '{case.name}' found in {iterations} iterations, residual {residual:.2e}")
    return Equilibrium(
        delta_star=delta,
        p_star=P[:case.m].copy(),
        phi_star=phi_star,
        slack_adjustment=slack,
        iterations=iterations,
        residual=residual,
    )
