"""Network description, cable catalog and admittance-matrix construction.

All network quantities handed to the power-flow code are per-unit.  Cable data
is kept in physical units (siemens per km, USD per km) and converted with
:func:`to_per_unit` when the admittance matrix is stamped.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


class TopologyError(ValueError):
    """Raised for disconnected or malformed networks."""


class NumericError(ArithmeticError):
    """Raised when the non-slack admittance block cannot be inverted."""


@dataclass(frozen=True)
class CableSpec:
    size_mm2: float
    admittance_per_km: complex  # siemens-km (series element)
    cost_per_km: float

    def __post_init__(self):
        if not self.size_mm2 > 0:
            raise ValueError(f"cable size must be positive, got {self.size_mm2}")
        if self.cost_per_km < 0:
            raise ValueError(f"cable cost must be non-negative, got {self.cost_per_km}")
        if not complex(self.admittance_per_km).real > 0:
            raise ValueError("cable admittance must have a positive real part")
        object.__setattr__(self, "admittance_per_km", complex(self.admittance_per_km))


# The shipped catalog (data/cables.csv) holds series admittance per km and
# installed cost per km.  The source table labels the admittance column in ohms,
# but the magnitudes grow with conductor size, so they are read as siemens.  The
# 95 mm2 row breaks the monotone trend of the real part; it is kept verbatim.
CATALOG_HEADER = ("size_mm2", "g_per_km", "b_per_km", "cost_per_km")


class CableCatalog:
    """Cables keyed by conductor cross-section."""

    def __init__(self, cables: Iterable[CableSpec]):
        cables = list(cables)
        sizes = [c.size_mm2 for c in cables]
        if len(set(sizes)) != len(sizes):
            raise ValueError("cable catalog sizes must be unique")
        self._cables = {c.size_mm2: c for c in sorted(cables, key=lambda c: c.size_mm2)}

    def __getitem__(self, size_mm2: float) -> CableSpec:
        try:
            return self._cables[float(size_mm2)]
        except KeyError:
            raise KeyError(f"no {size_mm2} mm2 cable in catalog") from None

    def __contains__(self, size_mm2) -> bool:
        return float(size_mm2) in self._cables

    def __iter__(self):
        return iter(self._cables.values())

    def __len__(self) -> int:
        return len(self._cables)

    def __eq__(self, other) -> bool:
        return isinstance(other, CableCatalog) and list(self) == list(other)

    @property
    def sizes(self) -> list[float]:
        return list(self._cables)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CATALOG_HEADER)
        for c in self:
            writer.writerow([repr(c.size_mm2), repr(c.admittance_per_km.real),
                             repr(c.admittance_per_km.imag), repr(c.cost_per_km)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, path: str | Path) -> "CableCatalog":
        with open(path, newline="", encoding="utf-8") as fh:
            return cls._parse(fh, str(path))

    @classmethod
    def _parse(cls, fh, origin: str) -> "CableCatalog":
        reader = csv.DictReader(fh)
        if tuple(h.strip() for h in (reader.fieldnames or ())) != CATALOG_HEADER:
            raise ValueError(f"{origin}: cable catalog header must be {','.join(CATALOG_HEADER)}")
        cables = []
        for lineno, row in enumerate(reader, start=2):
            try:
                cables.append(CableSpec(
                    size_mm2=float(row["size_mm2"]),
                    admittance_per_km=complex(float(row["g_per_km"]), float(row["b_per_km"])),
                    cost_per_km=float(row["cost_per_km"]),
                ))
            except (TypeError, ValueError) as exc:
                raise ValueError(f"{origin}:{lineno}: {exc}") from None
        return cls(cables)


def default_catalog() -> CableCatalog:
    text = resources.files("minigrid").joinpath("data/cables.csv").read_text(encoding="utf-8")
    return CableCatalog._parse(io.StringIO(text), "cables.csv")


def cable_series_admittance(cable: CableSpec, length_km: float) -> complex:
    """Series admittance in siemens of ``length_km`` of ``cable``."""
    if not length_km > 0:
        raise ValueError(f"cable length must be positive, got {length_km}")
    return cable.admittance_per_km / length_km


def to_per_unit(y: complex, v_base: float, s_base: float) -> complex:
    """Convert an admittance in siemens to per-unit (``v_base`` in V, ``s_base`` in kVA)."""
    if not v_base > 0 or not s_base > 0:
        raise ValueError("per-unit bases must be positive")
    z_base = v_base**2 / (s_base * 1000.0)
    return y * z_base


@dataclass(frozen=True)
class Edge:
    i: int
    j: int
    cable: CableSpec
    length_km: float

    def __post_init__(self):
        if self.i == self.j:
            raise TopologyError(f"edge endpoints must differ, got ({self.i}, {self.j})")
        if not self.length_km > 0:
            raise ValueError(f"edge ({self.i}, {self.j}) length must be positive")


@dataclass(frozen=True)
class NetworkModel:
    """Single-phase equivalent network; node 0 is the slack."""

    node_count: int
    edges: tuple[Edge, ...] = ()
    slack_voltage: complex = 1.0 + 0j
    s_base: float = 100.0  # kVA
    v_base: float = 400.0  # V

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple(self.edges))
        object.__setattr__(self, "slack_voltage", complex(self.slack_voltage))
        if self.node_count < 1:
            raise TopologyError("network needs at least the slack node")
        if not self.s_base > 0 or not self.v_base > 0:
            raise ValueError("per-unit bases must be positive")
        for e in self.edges:
            for k in (e.i, e.j):
                if not 0 <= k < self.node_count:
                    raise TopologyError(f"edge ({e.i}, {e.j}) references node {k} out of range")
        if len(self._reachable()) != self.node_count:
            raise TopologyError("network is not connected to the slack node")

    @property
    def m(self) -> int:
        """Number of non-slack nodes."""
        return self.node_count - 1

    def _adjacency(self) -> dict[int, list[int]]:
        adj: dict[int, list[int]] = {k: [] for k in range(self.node_count)}
        for e in self.edges:
            adj[e.i].append(e.j)
            adj[e.j].append(e.i)
        return adj

    def _reachable(self) -> set[int]:
        adj = self._adjacency()
        seen, stack = {0}, [0]
        while stack:
            for k in adj[stack.pop()]:
                if k not in seen:
                    seen.add(k)
                    stack.append(k)
        return seen

    @property
    def is_radial(self) -> bool:
        return len(self.edges) == self.node_count - 1

    def parent_edges(self) -> dict[int, tuple[int, Edge]]:
        """Map each non-slack node to (parent node, edge towards the slack).

        Only defined for radial networks.
        """
        if not self.is_radial:
            raise TopologyError("parent edges are only defined for radial networks")
        adj: dict[int, list[tuple[int, Edge]]] = {k: [] for k in range(self.node_count)}
        for e in self.edges:
            adj[e.i].append((e.j, e))
            adj[e.j].append((e.i, e))
        parents: dict[int, tuple[int, Edge]] = {}
        order = [0]
        for node in order:
            for nxt, e in adj[node]:
                if nxt != 0 and nxt not in parents:
                    parents[nxt] = (node, e)
                    order.append(nxt)
        return parents

    def with_cable(self, cable: CableSpec, length_km: float) -> "NetworkModel":
        """Same topology with every edge re-cabled to ``cable`` at ``length_km``."""
        edges = tuple(Edge(e.i, e.j, cable, length_km) for e in self.edges)
        return NetworkModel(self.node_count, edges, self.slack_voltage, self.s_base, self.v_base)


def star_network(leaves: int, cable: CableSpec, length_km: float, **kwargs) -> NetworkModel:
    """Slack hub (node 0) with ``leaves`` spokes of identical cable and length."""
    edges = [Edge(0, k, cable, length_km) for k in range(1, leaves + 1)]
    return NetworkModel(leaves + 1, tuple(edges), **kwargs)


@dataclass(frozen=True, eq=False)
class AdmittanceMatrix:
    Y: np.ndarray = field(repr=False)

    @property
    def Y00(self) -> np.ndarray:
        return self.Y[:1, :1]

    @property
    def Y0L(self) -> np.ndarray:
        return self.Y[:1, 1:]

    @property
    def YL0(self) -> np.ndarray:
        return self.Y[1:, :1]

    @property
    def YLL(self) -> np.ndarray:
        return self.Y[1:, 1:]

    @property
    def m(self) -> int:
        return self.Y.shape[0] - 1


def build_admittance_matrix(net: NetworkModel) -> AdmittanceMatrix:
    n = net.node_count
    Y = np.zeros((n, n), dtype=complex)
    for e in net.edges:
        y = to_per_unit(cable_series_admittance(e.cable, e.length_km), net.v_base, net.s_base)
        Y[e.i, e.i] += y
        Y[e.j, e.j] += y
        Y[e.i, e.j] -= y
        Y[e.j, e.i] -= y
    adm = AdmittanceMatrix(Y)
    if adm.m:
        cond = np.linalg.cond(adm.YLL)
        if not np.isfinite(cond) or cond > 1e14:
            raise NumericError(f"non-slack admittance block is singular (cond={cond:.3g})")
    adm.Y.setflags(write=False)
    return adm


def network_from_edges(node_count: int, edges: Sequence[tuple[int, int, CableSpec, float]],
                       **kwargs) -> NetworkModel:
    return NetworkModel(node_count, tuple(Edge(*e) for e in edges), **kwargs)
