"""Problem data: extended costs, finite problems, runs, cost constructors.

Costs are non-negative floats extended with ``math.inf``; float arithmetic
already saturates (inf + x = inf), which is exactly the convention required.
Accumulation order is fixed (time increasing) so results are reproducible.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .sets import SetPredicate

INF = math.inf

STOP = -1  # controller table entry meaning "no input chosen, stop here"


def parse_cost(token: str) -> float:
    if token == "inf":
        return INF
    value = float(token)
    if not value >= 0.0 or math.isnan(value):
        raise InputError(f"cost must be non-negative or inf, got {token!r}")
    return value


def format_cost(value: float) -> str:
    return "inf" if value == INF else repr(float(value))


@dataclass(frozen=True)
class Run:
    """A finite closed-loop prefix: states x, inputs u, stopping bits v.

    ``len(x) == len(u) + 1``; ``v`` may either align with ``u`` or carry one
    extra entry for a stop decision at the final state.  A run whose ``v``
    contains no 1 stands for a never-stopping evolution and evaluates to inf.
    """

    x: tuple
    u: tuple
    v: tuple

    def __post_init__(self):
        if len(self.x) != len(self.u) + 1:
            raise InputError("run length mismatch: need len(x) == len(u) + 1")
        if len(self.v) not in (len(self.u), len(self.u) + 1):
            raise InputError("run length mismatch: v must align with u or x")
        if any(b not in (0, 1) for b in self.v):
            raise InputError("stopping signal must be 0/1-valued")

    @property
    def stop_time(self):
        """First index with v = 1, or None for a never-stopping run."""
        for t, b in enumerate(self.v):
            if b == 1:
                return t
        return None


def eval_cost_functional(run: Run, costs) -> float:
    """Total cost of a run: terminal cost at the stop instant plus the
    accumulated running costs; inf if the run never stops.

    ``costs`` is either a FiniteProblem (states/inputs are indices) or any
    object with callables ``G(p)`` and ``g(p, q, u)``.
    """
    if isinstance(costs, FiniteProblem):
        G = lambda p: float(costs.G[p])
        g = costs.cost_of
    else:
        G, g = costs.G, costs.g
    T = run.stop_time
    if T is None:
        return INF
    total = 0.0
    for t in range(T):
        total += g(run.x[t], run.x[t + 1], run.u[t])
    return total + G(run.x[T])


class FiniteProblem:
    """A finite optimal control problem (X, U, F, G, g) in indexed form.

    Transitions are stored CSR-style per (state, input) pair; every pair must
    have at least one successor (the transition function is strict).  Running
    costs are attached per transition, or per (state, input) pair when they do
    not depend on the successor (``pair_costs`` mode, used by large
    abstractions to keep memory linear in the pair count).
    """

    def __init__(self, n, m, G, trans_ptr, trans_succ, edge_costs=None, pair_costs=None):
        self.n = int(n)
        self.m = int(m)
        self.G = np.asarray(G, dtype=float)
        self.trans_ptr = np.asarray(trans_ptr, dtype=np.int64)
        self.trans_succ = np.asarray(trans_succ)
        self.edge_costs = None if edge_costs is None else np.asarray(edge_costs, dtype=float)
        self.pair_costs = None if pair_costs is None else np.asarray(pair_costs, dtype=float)
        self._validate()

    def _validate(self):
        if self.n <= 0 or self.m <= 0:
            raise InputError("need at least one state and one input")
        if self.G.shape != (self.n,):
            raise InputError("terminal cost array has wrong length")
        if np.any(np.isnan(self.G)) or np.any(self.G < 0):
            raise InputError("terminal costs must be non-negative")
        if self.trans_ptr.shape != (self.n * self.m + 1,):
            raise InputError("transition index has wrong length")
        if self.trans_ptr[0] != 0 or self.trans_ptr[-1] != len(self.trans_succ):
            raise InputError("transition index is inconsistent")
        if np.any(np.diff(self.trans_ptr) < 1):
            raise InputError("every (state, input) pair needs a successor (F strict)")
        if len(self.trans_succ) and (
            self.trans_succ.min() < 0 or self.trans_succ.max() >= self.n
        ):
            raise InputError("successor index out of range")
        if (self.edge_costs is None) == (self.pair_costs is None):
            raise InputError("exactly one of edge_costs/pair_costs required")
        costs = self.edge_costs if self.edge_costs is not None else self.pair_costs
        want = len(self.trans_succ) if self.edge_costs is not None else self.n * self.m
        if costs.shape != (want,):
            raise InputError("cost array has wrong length")
        if np.any(np.isnan(costs)) or np.any(costs < 0):
            raise InputError("running costs must be non-negative")

    @classmethod
    def from_lists(cls, G, trans):
        """Build from ``trans[p][u] = [(q, g), ...]`` nested lists."""
        n = len(trans)
        if n == 0:
            raise InputError("need at least one state")
        m = len(trans[0])
        ptr = [0]
        succ = []
        costs = []
        for p in range(n):
            if len(trans[p]) != m:
                raise InputError("ragged input axis in transition lists")
            for u in range(m):
                seen = {}
                for q, gval in trans[p][u]:
                    if q in seen:
                        raise InputError(f"duplicate transition ({p},{u},{q})")
                    seen[q] = None
                    succ.append(q)
                    costs.append(gval)
                ptr.append(len(succ))
        return cls(n, m, G, ptr, np.asarray(succ, dtype=np.int64), edge_costs=costs)

    @property
    def n_edges(self) -> int:
        return len(self.trans_succ)

    def pair_id(self, p, u) -> int:
        return p * self.m + u

    def successors(self, p, u):
        """(successor indices, costs) arrays for the pair (p, u)."""
        a, b = self.trans_ptr[self.pair_id(p, u)], self.trans_ptr[self.pair_id(p, u) + 1]
        succ = self.trans_succ[a:b]
        if self.edge_costs is not None:
            return succ, self.edge_costs[a:b]
        return succ, np.full(b - a, self.pair_costs[self.pair_id(p, u)])

    def cost_of(self, p, q, u) -> float:
        """Totalized running cost: inf when q is not a successor of (p, u)."""
        a, b = self.trans_ptr[self.pair_id(p, u)], self.trans_ptr[self.pair_id(p, u) + 1]
        idx = np.nonzero(self.trans_succ[a:b] == q)[0]
        if len(idx) == 0:
            return INF
        if self.edge_costs is not None:
            return float(self.edge_costs[a + idx[0]])
        return float(self.pair_costs[self.pair_id(p, u)])

    def edge_cost_view(self):
        """Per-edge cost array regardless of the storage mode."""
        if self.edge_costs is not None:
            return self.edge_costs
        reps = np.diff(self.trans_ptr)
        return np.repeat(self.pair_costs, reps)

    def validate_run(self, run: Run) -> None:
        for t in range(len(run.u)):
            succ, _ = self.successors(run.x[t], run.u[t])
            if run.x[t + 1] not in succ:
                raise InputError(f"run step {t}: state {run.x[t + 1]} is not reachable")

    # --- FOCP v1 text format -------------------------------------------------

    def to_focp_text(self) -> str:
        lines = [f"focp {self.n} {self.m}"]
        for p in range(self.n):
            lines.append(f"G {p} {format_cost(self.G[p])}")
        costs = self.edge_cost_view()
        for p in range(self.n):
            for u in range(self.m):
                a, b = self.trans_ptr[self.pair_id(p, u)], self.trans_ptr[self.pair_id(p, u) + 1]
                for e in range(a, b):
                    lines.append(f"T {p} {u} {self.trans_succ[e]} {format_cost(costs[e])}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_focp_text(cls, text: str) -> "FiniteProblem":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines or not lines[0].startswith("focp"):
            raise InputError("missing focp header")
        try:
            _, n_s, m_s = lines[0].split()
            n, m = int(n_s), int(m_s)
        except ValueError as exc:
            raise InputError("malformed focp header") from exc
        if n <= 0 or m <= 0:
            raise InputError("focp header: need positive state/input counts")
        G = np.full(n, INF)
        trans = [[[] for _ in range(m)] for _ in range(n)]
        for ln in lines[1:]:
            parts = ln.split()
            if parts[0] == "G" and len(parts) == 3:
                p = int(parts[1])
                if not 0 <= p < n:
                    raise InputError(f"state index out of range: {ln!r}")
                G[p] = parse_cost(parts[2])
            elif parts[0] == "T" and len(parts) == 5:
                p, u, q = int(parts[1]), int(parts[2]), int(parts[3])
                if not (0 <= p < n and 0 <= u < m and 0 <= q < n):
                    raise InputError(f"index out of range: {ln!r}")
                trans[p][u].append((q, parse_cost(parts[4])))
            else:
                raise InputError(f"unrecognized focp record: {ln!r}")
        return cls.from_lists(G, trans)


# --- Canonical problem constructors ------------------------------------------


@dataclass
class CostModel:
    """Concrete cost functions of a control problem plus the region data
    needed to reason about them cell-wise.

    ``g``/``G`` evaluate at concrete points; the ``cell_*`` predicates decide
    whether a closed cell lies entirely inside the finite-cost region, which
    is what Lipschitz-based cost abstraction requires.
    """

    kind: str
    target: SetPredicate
    obstacle: SetPredicate

    def G(self, p) -> float:
        if self.target.contains(p) and not self.obstacle.contains(p):
            return 0.0
        return INF

    def g(self, p, q, u) -> float:
        if self.obstacle.contains(p):
            return INF
        if self.kind == "reach_avoid":
            return 0.0
        if self.kind == "min_time":
            return 1.0
        u = np.asarray(u, dtype=float)
        return float(u @ u)

    def cell_G_finite(self, lo, hi) -> bool:
        return self.target.cell_inside(lo, hi) and self.obstacle.cell_disjoint(lo, hi)

    def cell_g_finite(self, lo, hi) -> bool:
        return self.obstacle.cell_disjoint(lo, hi)

    def cell_all_infinite(self, lo, hi) -> bool:
        """Both cost functions are identically inf on the cell (the region the
        conservatism conditions exempt)."""
        return self.obstacle.cell_inside(lo, hi)

    def cells_G_finite(self, lo, hi):
        return self.target.cell_inside_batch(lo, hi) & self.obstacle.cell_disjoint_batch(lo, hi)

    def cells_g_finite(self, lo, hi):
        return self.obstacle.cell_disjoint_batch(lo, hi)

    def cells_all_infinite(self, lo, hi):
        return self.obstacle.cell_inside_batch(lo, hi)

    def finite_g_value(self, u) -> float:
        """Running cost on the finite region (independent of p, q there)."""
        if self.kind == "reach_avoid":
            return 0.0
        if self.kind == "min_time":
            return 1.0
        u = np.asarray(u, dtype=float)
        return float(u @ u)


def make_reach_avoid(D: SetPredicate, M: SetPredicate):
    """Costs for steering into the target D while avoiding the obstacles M:
    G = 0 on D minus M (else inf), g = 0 outside M (else inf)."""
    model = CostModel("reach_avoid", D, M)
    return model.g, model.G


def make_min_time(D: SetPredicate, M: SetPredicate):
    """Reach-avoid in minimum time: as make_reach_avoid but each step outside
    the obstacles costs 1."""
    model = CostModel("min_time", D, M)
    return model.g, model.G


def cost_model(kind: str, D: SetPredicate, M: SetPredicate) -> CostModel:
    if kind not in ("reach_avoid", "min_time", "energy_entry"):
        raise InputError(f"unknown cost kind {kind!r}")
    return CostModel(kind, D, M)


def make_shortest_path(n_vertices: int, arcs, source: int) -> FiniteProblem:
    """Single-source shortest paths as a finite control problem.

    ``arcs`` is an iterable of (tail, head, length); duplicate arcs keep the
    minimum length.  The control problem walks arcs backwards from each vertex
    towards the source, so its value function equals the distance array.
    The input alphabet is the vertex set; input u from state p moves to u when
    the graph has an arc (u, p), and otherwise loops in place at infinite cost
    so that staying put never creates spurious finite values.
    """
    n = int(n_vertices)
    if not 0 <= source < n:
        raise InputError("source vertex out of range")
    weight = {}
    for tail, head, w in arcs:
        if not (0 <= tail < n and 0 <= head < n):
            raise InputError("arc endpoint out of range")
        if w < 0:
            raise InputError("arc lengths must be non-negative")
        key = (tail, head)
        if key not in weight or w < weight[key]:
            weight[key] = float(w)

    G = np.full(n, INF)
    G[source] = 0.0
    ptr = np.arange(n * n + 1, dtype=np.int64)  # single-valued F
    succ = np.empty(n * n, dtype=np.int64)
    costs = np.full(n * n, INF)
    base = np.arange(n, dtype=np.int64)
    for p in range(n):
        succ[p * n : (p + 1) * n] = p  # default: stay put, never improving
    for (tail, head), w in weight.items():
        pid = head * n + tail  # from state `head`, input `tail` walks the arc backwards
        succ[pid] = tail
        costs[pid] = w
    return FiniteProblem(n, n, G, ptr, succ, edge_costs=costs)


def dijkstra_distances(n_vertices: int, arcs, source: int):
    """Textbook single-source shortest-path distances (oracle for tests)."""
    adj = [[] for _ in range(n_vertices)]
    best = {}
    for tail, head, w in arcs:
        key = (tail, head)
        if key not in best or w < best[key]:
            best[key] = float(w)
    for (tail, head), w in best.items():
        adj[tail].append((head, w))
    dist = np.full(n_vertices, INF)
    dist[source] = 0.0
    heap = [(0.0, source)]
    done = [False] * n_vertices
    while heap:
        d, p = heapq.heappop(heap)
        if done[p]:
            continue
        done[p] = True
        for q, w in adj[p]:
            nd = d + w
            if nd < dist[q]:
                dist[q] = nd
                heapq.heappush(heap, (nd, q))
    return dist


@dataclass
class ControllerTable:
    """Static abstract controller: per state, a chosen input index or STOP."""

    choice: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))

    def __post_init__(self):
        self.choice = np.asarray(self.choice, dtype=np.int64)

    def __len__(self):
        return len(self.choice)

    def is_stop(self, p) -> bool:
        return self.choice[p] == STOP

    def to_text(self) -> str:
        lines = []
        for p, u in enumerate(self.choice):
            lines.append(f"{p} STOP" if u == STOP else f"{p} {u}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ControllerTable":
        entries = {}
        for ln in text.splitlines():
            if not ln.strip():
                continue
            parts = ln.split()
            if len(parts) != 2:
                raise InputError(f"malformed controller record: {ln!r}")
            p = int(parts[0])
            entries[p] = STOP if parts[1] == "STOP" else int(parts[1])
        if sorted(entries) != list(range(len(entries))):
            raise InputError("controller file must cover states 0..n-1")
        return cls(np.array([entries[p] for p in range(len(entries))], dtype=np.int64))


def values_to_text(W) -> str:
    return "\n".join(f"{p} {format_cost(w)}" for p, w in enumerate(W)) + "\n"


def values_from_text(text: str) -> np.ndarray:
    entries = {}
    for ln in text.splitlines():
        if not ln.strip():
            continue
        parts = ln.split()
        if len(parts) != 2:
            raise InputError(f"malformed value record: {ln!r}")
        entries[int(parts[0])] = parse_cost(parts[1])
    if sorted(entries) != list(range(len(entries))):
        raise InputError("value file must cover states 0..n-1")
    return np.array([entries[p] for p in range(len(entries))])
