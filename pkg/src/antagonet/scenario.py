"""JSON scenario files: one experiment per file.

Layout (all keys except ``n`` and ``graphs``/``signed_graph`` optional)::

    {
      "name": "example3",
      "n": 4,
      "labels": ["1", "2", "3", "4"],
      "graphs": [{"name": "a", "edges": [["3", "4", 1.0]]}, ...],
      "leaders": ["1", "2"],
      "delta": [0.75, -0.85], "rho": [0.75, -0.8], "epsilon": 0.15,
      "schedule": {"kind": "rotation", "order": [1, 0]},
      "tdadt": {"dwell": [3, 5], "chatter": [1, 1]},
      "certificate": {"omega": [1, 1], "gamma": [1.01, 1.03], "S1": [0], "S2": [1]},
      "initial": null, "seed": 42, "horizon": 300,
      "analysis": {"followers_only": false, "containment": false}
    }

Edges are ``[from, to]`` or ``[from, to, weight]`` with endpoints given as node
labels (default labels are "1".."n"). A signed network uses ``signed_graph``
with the same edge syntax; negative weights are allowed only there.
Schedules are ``{"kind": "constant", "topology": i}``,
``{"kind": "explicit", "sigma": [...]}`` or ``{"kind": "rotation", "order": [...]}``
(rotation holds topology i for ``tdadt.dwell[i]`` instants).
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .gains import SystemConfig
from .graph import Digraph
from .switching import TdadtSpec, synthesize_schedule


class ScenarioError(ValueError):
    """Malformed scenario; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(frozen=True)
class Scenario:
    name: str
    n: int
    labels: tuple[str, ...]
    graph_names: tuple[str, ...]
    graph_edges: tuple[tuple[tuple[str, str, float], ...], ...]
    signed_edges: tuple[tuple[str, str, float], ...] | None
    leaders: tuple[str, ...] | None
    delta: tuple[float, ...] | None
    rho: tuple[float, ...] | None
    epsilon: float | None
    schedule: dict | None
    tdadt: dict | None
    certificate: dict | None
    initial: tuple[float, ...] | None
    seed: int
    horizon: int
    analysis: dict = field(default_factory=dict)
    description: str = ""

    # -- derived objects -------------------------------------------------

    def index(self, label: str) -> int:
        return self.labels.index(label)

    def _matrix(self, edges, signed: bool) -> np.ndarray:
        w = np.zeros((self.n, self.n))
        for src, dst, wt in edges:
            w[self.index(dst), self.index(src)] += wt
        return w

    def graphs(self) -> list[Digraph]:
        return [Digraph(self._matrix(e, False), self.labels) for e in self.graph_edges]

    def signed_adjacency(self) -> np.ndarray:
        if self.signed_edges is None:
            raise ScenarioError("signed_graph", "scenario has no signed graph")
        return self._matrix(self.signed_edges, True)

    def leader_indices(self) -> list[int] | None:
        return None if self.leaders is None else [self.index(s) for s in self.leaders]

    def config(self) -> SystemConfig:
        if self.delta is None or self.rho is None or self.epsilon is None:
            raise ScenarioError("delta", "delta, rho and epsilon are required for this command")
        return SystemConfig(self.delta, self.rho, self.epsilon, self.n)

    def tdadt_spec(self) -> TdadtSpec | None:
        if self.tdadt is None:
            return None
        return TdadtSpec(self.tdadt["dwell"], self.tdadt.get("chatter", [1] * len(self.tdadt["dwell"])))

    def sigma(self, horizon: int | None = None) -> list[int]:
        k = self.horizon if horizon is None else horizon
        s = self.schedule or {"kind": "constant", "topology": 0}
        if s["kind"] == "constant":
            return [int(s.get("topology", 0))] * k
        if s["kind"] == "explicit":
            sig = [int(x) for x in s["sigma"]]
            if len(sig) < k:
                raise ScenarioError("schedule.sigma", f"covers {len(sig)} instants, horizon is {k}")
            return sig[:k]
        spec = self.tdadt_spec()
        if spec is None:
            raise ScenarioError("schedule", "rotation schedules need tdadt.dwell")
        return synthesize_schedule(spec.dwell, k, s.get("order"))

    def initial_state(self, seed: int | None = None) -> np.ndarray:
        """Initial values in input node order; seeded uniform [-1, 1] when not given."""
        if self.initial is not None:
            return np.asarray(self.initial, float)
        rng = np.random.default_rng(self.seed if seed is None else seed)
        return rng.uniform(-1.0, 1.0, self.n)

    # -- serialisation ---------------------------------------------------

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"name": self.name, "n": self.n, "labels": list(self.labels)}
        if self.description:
            d["description"] = self.description
        if self.graph_edges:
            d["graphs"] = [
                {"name": nm, "edges": [[s, t, w] for s, t, w in e]}
                for nm, e in zip(self.graph_names, self.graph_edges)
            ]
        if self.signed_edges is not None:
            d["signed_graph"] = {"edges": [[s, t, w] for s, t, w in self.signed_edges]}
        for key in ("leaders", "delta", "rho", "initial"):
            v = getattr(self, key)
            if v is not None:
                d[key] = list(v)
        for key in ("epsilon", "schedule", "tdadt", "certificate"):
            v = getattr(self, key)
            if v is not None:
                d[key] = copy.deepcopy(v)
        d["seed"] = self.seed
        d["horizon"] = self.horizon
        if self.analysis:
            d["analysis"] = copy.deepcopy(self.analysis)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        if not isinstance(d, dict):
            raise ScenarioError("<root>", "scenario must be a JSON object")
        n = _int(d, "n", required=True)
        if n < 1:
            raise ScenarioError("n", "must be >= 1")
        labels = d.get("labels")
        if labels is None:
            labels = [str(i + 1) for i in range(n)]
        if not isinstance(labels, list) or len(labels) != n:
            raise ScenarioError("labels", f"expected a list of {n} names")
        labels = tuple(str(s) for s in labels)
        if len(set(labels)) != n:
            raise ScenarioError("labels", "names must be unique")

        names, edge_sets = [], []
        graphs = d.get("graphs", [])
        if not isinstance(graphs, list):
            raise ScenarioError("graphs", "expected a list")
        for gi, g in enumerate(graphs):
            path = f"graphs[{gi}]"
            if not isinstance(g, dict):
                raise ScenarioError(path, "expected an object")
            names.append(str(g.get("name", gi)))
            edge_sets.append(_edges(g.get("edges", []), f"{path}.edges", labels, signed=False))
        signed = None
        if "signed_graph" in d:
            sg = d["signed_graph"]
            if not isinstance(sg, dict):
                raise ScenarioError("signed_graph", "expected an object")
            signed = _edges(sg.get("edges", []), "signed_graph.edges", labels, signed=True)
        if not edge_sets and signed is None:
            raise ScenarioError("graphs", "at least one graph (or signed_graph) is required")

        leaders = d.get("leaders")
        if leaders is not None:
            if not isinstance(leaders, list) or not leaders:
                raise ScenarioError("leaders", "expected a nonempty list of labels")
            leaders = tuple(_label(x, f"leaders[{i}]", labels) for i, x in enumerate(leaders))

        delta = _floats(d, "delta")
        rho = _floats(d, "rho")
        eps = d.get("epsilon")
        if eps is not None:
            if not isinstance(eps, (int, float)) or isinstance(eps, bool) or eps < 0:
                raise ScenarioError("epsilon", "must be a nonnegative number")
            eps = float(eps)
        if delta is not None and rho is not None and len(delta) != len(rho):
            raise ScenarioError("rho", f"has {len(rho)} entries, delta has {len(delta)}")
        if delta is not None and any(x == 0 for x in delta):
            raise ScenarioError("delta", "scaling parameters must be nonzero")

        schedule = d.get("schedule")
        if schedule is not None:
            _check_schedule(schedule, len(edge_sets))
        tdadt = d.get("tdadt")
        if tdadt is not None:
            if not isinstance(tdadt, dict) or "dwell" not in tdadt:
                raise ScenarioError("tdadt", "expected an object with 'dwell'")
            if len(tdadt["dwell"]) != len(edge_sets):
                raise ScenarioError("tdadt.dwell", "one dwell time per graph")
            try:
                TdadtSpec(tdadt["dwell"], tdadt.get("chatter", [1] * len(tdadt["dwell"])))
            except ValueError as exc:
                raise ScenarioError("tdadt", str(exc)) from None
        cert = d.get("certificate")
        if cert is not None:
            if not isinstance(cert, dict):
                raise ScenarioError("certificate", "expected an object")
            for key in ("omega", "gamma", "S1", "S2"):
                if key not in cert:
                    raise ScenarioError(f"certificate.{key}", "missing")
        initial = _floats(d, "initial")
        if initial is not None and len(initial) != n:
            raise ScenarioError("initial", f"expected {n} values")
        seed = _int(d, "seed", default=42)
        horizon = _int(d, "horizon", default=200)
        if horizon < 1:
            raise ScenarioError("horizon", "must be >= 1")
        analysis = d.get("analysis", {})
        if not isinstance(analysis, dict):
            raise ScenarioError("analysis", "expected an object")
        return cls(
            name=str(d.get("name", "scenario")),
            n=n,
            labels=labels,
            graph_names=tuple(names),
            graph_edges=tuple(edge_sets),
            signed_edges=signed,
            leaders=leaders,
            delta=delta,
            rho=rho,
            epsilon=eps,
            schedule=copy.deepcopy(schedule),
            tdadt=copy.deepcopy(tdadt),
            certificate=copy.deepcopy(cert),
            initial=initial,
            seed=seed,
            horizon=horizon,
            analysis=copy.deepcopy(analysis),
            description=str(d.get("description", "")),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def load(path) -> Scenario:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ScenarioError(str(p), f"cannot read: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{p}:{exc.lineno}:{exc.colno}", exc.msg) from None
    return Scenario.from_dict(data)


def _label(x, path: str, labels) -> str:
    s = str(x)
    if s not in labels:
        raise ScenarioError(path, f"unknown node {s!r}")
    return s


def _edges(raw, path: str, labels, signed: bool):
    if not isinstance(raw, list):
        raise ScenarioError(path, "expected a list of edges")
    out = []
    for i, e in enumerate(raw):
        p = f"{path}[{i}]"
        if not isinstance(e, list) or len(e) not in (2, 3):
            raise ScenarioError(p, "edge must be [from, to] or [from, to, weight]")
        src, dst = _label(e[0], p, labels), _label(e[1], p, labels)
        if src == dst:
            raise ScenarioError(p, "self-loops are not allowed")
        w = e[2] if len(e) == 3 else 1.0
        if not isinstance(w, (int, float)) or isinstance(w, bool) or not np.isfinite(w):
            raise ScenarioError(p, "weight must be a finite number")
        if not signed and w < 0:
            raise ScenarioError(
                p, "negative weight; edge weights follow the usual algebraic graph theory convention a_ij >= 0"
            )
        out.append((src, dst, float(w)))
    return tuple(out)


def _floats(d: dict, key: str):
    v = d.get(key)
    if v is None:
        return None
    if not isinstance(v, list) or not all(
        isinstance(x, (int, float)) and not isinstance(x, bool) for x in v
    ):
        raise ScenarioError(key, "expected a list of numbers")
    return tuple(float(x) for x in v)


def _int(d: dict, key: str, default=None, required: bool = False) -> int:
    if key not in d:
        if required:
            raise ScenarioError(key, "missing")
        return default
    v = d[key]
    if not isinstance(v, int) or isinstance(v, bool):
        raise ScenarioError(key, "expected an integer")
    return v


def _check_schedule(s, n_graphs: int) -> None:
    if not isinstance(s, dict) or s.get("kind") not in ("constant", "explicit", "rotation"):
        raise ScenarioError("schedule.kind", "must be 'constant', 'explicit' or 'rotation'")
    if s["kind"] == "constant":
        t = s.get("topology", 0)
        if not isinstance(t, int) or not 0 <= t < max(n_graphs, 1):
            raise ScenarioError("schedule.topology", "unknown topology index")
    if s["kind"] == "explicit":
        sig = s.get("sigma")
        if not isinstance(sig, list) or any(not isinstance(x, int) or not 0 <= x < n_graphs for x in sig):
            raise ScenarioError("schedule.sigma", "expected a list of topology indices")
    if s["kind"] == "rotation":
        order = s.get("order", list(range(n_graphs)))
        if not isinstance(order, list) or any(not isinstance(x, int) or not 0 <= x < n_graphs for x in order):
            raise ScenarioError("schedule.order", "expected a list of topology indices")
