"""Valuated relation checkers, controller refinement and pointwise bounds.

The checkers evaluate the defining conditions literally over all related
pairs and report violations instead of raising; running-cost evaluators
default to the totalized per-transition costs of the finite problems (inf off
transitions) and can be overridden, e.g. with formula-based concrete costs
when one side is a sampled fragment of a continuous problem.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import INF, STOP, ControllerTable, FiniteProblem
from .errors import InputError
from .grid import GridCover
from .solver import dp_operator


class Relation:
    """A set of (state of problem 1, state of problem 2) pairs with indexed
    forward and inverse adjacency."""

    def __init__(self, pairs):
        self.pairs = sorted(set((int(a), int(b)) for a, b in pairs))
        self.forward = {}
        self.inverse = {}
        for a, b in self.pairs:
            self.forward.setdefault(a, []).append(b)
            self.inverse.setdefault(b, []).append(a)

    def __len__(self):
        return len(self.pairs)

    def image(self, p1):
        return self.forward.get(p1, [])

    def preimage(self, p2):
        return self.inverse.get(p2, [])

    def is_strict(self, n1: int) -> bool:
        return all(p in self.forward for p in range(n1))

    def to_text(self) -> str:
        return "\n".join(f"{a} {b}" for a, b in self.pairs) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Relation":
        pairs = []
        for ln in text.splitlines():
            if not ln.strip():
                continue
            parts = ln.split()
            if len(parts) != 2:
                raise InputError(f"malformed relation record: {ln!r}")
            pairs.append((int(parts[0]), int(parts[1])))
        return cls(pairs)


@dataclass
class Verdict:
    ok: bool
    violations: list = field(default_factory=list)
    gated_pairs: int = 0  # vASR pairs skipped by the boundedness side-conditions

    def to_text(self) -> str:
        lines = [f"verdict: {'true' if self.ok else 'false'}"]
        if self.gated_pairs:
            lines.append(f"gated_pairs: {self.gated_pairs}")
        lines.append(f"violations: {len(self.violations)}")
        for tag, detail in self.violations[:100]:
            lines.append(f"({tag}) {detail}")
        return "\n".join(lines) + "\n"


def _default_costs(problem: FiniteProblem):
    return problem.cost_of, lambda p: float(problem.G[p])


def check_vfrr(p1: FiniteProblem, p2: FiniteProblem, rel: Relation, input_map=None, g1=None, G1=None, g2=None, G2=None, max_violations: int = 100) -> Verdict:
    """Feedback-refinement conditions (i)-(iv) over all related pairs."""
    if input_map is None:
        if p2.m > p1.m:
            return Verdict(False, [("i", f"input alphabet of problem 2 ({p2.m}) exceeds problem 1 ({p1.m})")])
        input_map = list(range(p2.m))
    if len(input_map) != p2.m or any(not 0 <= u < p1.m for u in input_map):
        return Verdict(False, [("i", "input map does not embed U2 into U1")])
    d1 = _default_costs(p1)
    d2 = _default_costs(p2)
    g1 = d1[0] if g1 is None else g1
    G1 = d1[1] if G1 is None else G1
    g2 = d2[0] if g2 is None else g2
    G2 = d2[1] if G2 is None else G2

    violations = []

    def add(tag, detail):
        if len(violations) < max_violations:
            violations.append((tag, detail))

    if not rel.is_strict(p1.n):
        missing = next(p for p in range(p1.n) if p not in rel.forward)
        add("strict", f"state {missing} of problem 1 has no related state")
    for a, b in rel.pairs:
        if G1(a) > G2(b):
            add("ii", f"G1({a}) = {G1(a)} > G2({b}) = {G2(b)}")
    for a, b in rel.pairs:
        for qa, qb in rel.pairs:
            for u2 in range(p2.m):
                if g1(a, qa, input_map[u2]) > g2(b, qb, u2):
                    add("iii", f"g1({a},{qa},{input_map[u2]}) > g2({b},{qb},{u2})")
    for a, b in rel.pairs:
        for u2 in range(p2.m):
            succ2 = set(int(q) for q in p2.successors(b, u2)[0])
            succ1, _ = p1.successors(a, input_map[u2])
            for q1 in succ1:
                for q2 in rel.image(int(q1)):
                    if q2 not in succ2:
                        add("iv", f"image {q2} of successor {int(q1)} of ({a},{input_map[u2]}) not in F2({b},{u2})")
    return Verdict(not violations, violations)


def check_vasr(p1: FiniteProblem, p2: FiniteProblem, rel: Relation, eps: float, g1=None, G1=None, g2=None, G2=None, max_violations: int = 100) -> Verdict:
    """Alternating-simulation conditions with slack eps.

    The exists/forall/exists condition is only enforced where the boundedness
    side-conditions hold; skipped pairs are counted so callers notice when
    the gate rather than the condition decided the verdict.
    """
    if eps < 0:
        raise InputError("eps must be non-negative")
    d1 = _default_costs(p1)
    d2 = _default_costs(p2)
    g1 = d1[0] if g1 is None else g1
    G1 = d1[1] if G1 is None else G1
    g2 = d2[0] if g2 is None else g2
    G2 = d2[1] if G2 is None else G2
    P1_zero = dp_operator(p1, np.zeros(p1.n))

    violations = []
    gated = 0

    def add(tag, detail):
        if len(violations) < max_violations:
            violations.append((tag, detail))

    for a, b in rel.pairs:
        if G1(a) > G2(b):
            add("i", f"G1({a}) = {G1(a)} > G2({b}) = {G2(b)}")
    for a, b in rel.pairs:
        if G1(a) <= 0.0:
            continue
        for u2 in range(p2.m):
            succ2, _ = p2.successors(b, u2)
            succ2 = [int(q) for q in succ2]
            g2_vals = {q2: g2(b, q2, u2) for q2 in succ2}
            if any(v == INF for v in g2_vals.values()):
                gated += 1
                continue
            if any(P1_zero[q1] == INF for q2 in succ2 for q1 in rel.preimage(q2)):
                gated += 1
                continue
            ok_u1 = False
            for u1 in range(p1.m):
                succ1, _ = p1.successors(a, u1)
                if all(
                    any(
                        g1(a, int(q1), u1) <= eps + g2_vals[q2]
                        for q2 in rel.image(int(q1))
                        if q2 in g2_vals
                    )
                    for q1 in succ1
                ):
                    ok_u1 = True
                    break
            if not ok_u1:
                add("ii", f"no input of problem 1 matches ({a},{b}) under input {u2} at eps {eps}")
    return Verdict(not violations, violations, gated)


@dataclass
class RefinedController:
    """Serial composition of the quantizer and a static abstract controller:
    quantize the concrete state, then look the input up in the table."""

    table: ControllerTable
    cover: GridCover
    representatives: np.ndarray
    u0_index: int = 0

    def __post_init__(self):
        if len(self.table) != self.cover.n_states:
            raise InputError("controller table size does not match the cover")

    def act(self, x):
        """Concrete control decision: (input vector, input index, stop bit)."""
        cell = self.cover.quantize(x)
        u = self.table.choice[cell]
        if u == STOP:
            return self.representatives[self.u0_index], self.u0_index, 1
        return self.representatives[u], int(u), 0


def serial_compose(table: ControllerTable, cover: GridCover, representatives) -> RefinedController:
    return RefinedController(table, cover, np.asarray(representatives, dtype=float))


def pointwise_upper_bound(W, cover: GridCover, x) -> float:
    """sup of W over all cells containing x (inf outside the cover, where the
    only member is the overflow cell)."""
    cells = cover.members(x)
    if not cells:
        return INF
    return float(max(W[c] for c in cells))
