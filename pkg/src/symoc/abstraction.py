"""Finite abstractions over cell covers with certified conservatism.

The abstract problem has one state per grid cell plus the overflow cell, which
absorbs everything outside the cover (infinite terminal cost, all-infinite
outgoing costs, a self-loop).  Cells on which both cost functions are
identically infinite receive a single transition to overflow instead of a
computed reach set.

Abstract costs follow the Lipschitz recipe: G2 is the center value plus
A2 * ||eta|| / 2 when the whole closed cell has finite terminal cost (else
inf), and the running cost adds A3 * ||eta|| on cells with finite running
cost.  Together with the transition over-approximation this makes the finite
problem an abstraction of the concrete one, with conservatism bounded by the
maximum of the certificate components.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import INF, CostModel, FiniteProblem
from .errors import InputError, SoundnessAlarm
from .grid import GridCover, InputGrid
from .reach import SampledSystem, attain_over, attain_over_batch

import logging

log = logging.getLogger(__name__)


@dataclass
class ConservatismCertificate:
    """Worst-case slack per conservatism condition; rho is their maximum."""

    input_radius: float
    terminal_slack: float
    running_slack: float
    transition_slack: float
    cell_diameter: float
    notes: list = field(default_factory=list)

    @property
    def rho(self) -> float:
        return max(
            self.input_radius,
            self.terminal_slack,
            self.running_slack,
            self.transition_slack,
            self.cell_diameter,
        )

    def to_lines(self):
        lines = [
            f"rho = {self.rho!r}",
            f"rho_input_radius = {self.input_radius!r}",
            f"rho_terminal_slack = {self.terminal_slack!r}",
            f"rho_running_slack = {self.running_slack!r}",
            f"rho_transition_slack = {self.transition_slack!r}",
            f"rho_cell_diameter = {self.cell_diameter!r}",
        ]
        lines.extend(f"note = {n}" for n in self.notes)
        return lines


class AbstractCosts:
    """Cost data of the abstraction: terminal array plus a lazy running-cost
    evaluator (per source cell and input; the successors never enter the
    finite running costs of the supported cost shapes)."""

    def __init__(self, model: CostModel, cover: GridCover, inputs: InputGrid, A2: float, A3: float):
        self.model = model
        self.cover = cover
        self.inputs = inputs
        self.A2 = float(A2)
        self.A3 = float(A3)
        eta_norm = cover.max_diameter
        centers = cover.centers_all()
        los = np.maximum(centers - cover.eta / 2, cover.lower)
        his = np.minimum(centers + cover.eta / 2, cover.upper)
        self.cell_lo, self.cell_hi = los, his
        self.G_finite = model.cells_G_finite(los, his)
        self.g_finite = model.cells_g_finite(los, his)
        self.gated = model.cells_all_infinite(los, his)
        self.G2 = np.full(cover.n_states, INF)
        for i in np.nonzero(self.G_finite)[0]:
            self.G2[i] = model.G(centers[i]) + self.A2 * eta_norm / 2.0
        self.input_values = np.array(
            [model.finite_g_value(u) + self.A3 * eta_norm for u in inputs.representatives]
        )
        self.terminal_slack = self.A2 * eta_norm
        self.running_slack = 2.0 * self.A3 * eta_norm

    def pair_value(self, cell: int, u_idx: int) -> float:
        if cell >= self.cover.n_cells or not self.g_finite[cell]:
            return INF
        return float(self.input_values[u_idx])

    def g2(self, cell: int, cell2: int, u_idx: int) -> float:
        """Totalized abstract running cost (cell2 may be the overflow cell)."""
        return self.pair_value(cell, u_idx)


def abstract_costs(costs: CostModel, cover: GridCover, inputs: InputGrid, A2: float, A3: float) -> AbstractCosts:
    return AbstractCosts(costs, cover, inputs, A2, A3)


class SampledReach:
    """Transition over-approximator for a sampled ODE plant.

    Per-cell calls run the interval subdivision procedure directly; the
    batched path exploits the state-independent radius dynamics to process
    all cells of the cover per input at once.
    """

    def __init__(self, sys: SampledSystem, cover: GridCover, inputs: InputGrid, k: int, theta: float, gamma: float, substeps: int = 5, max_splits: int = 64):
        self.sys = sys
        self.cover = cover
        self.inputs = inputs
        self.k = int(k)
        self.theta = float(theta)
        self.gamma = float(gamma)
        self.substeps = int(substeps)
        self.max_splits = int(max_splits)
        self.r0 = cover.eta / 2.0
        if not sys.substep_escape_guard_ok(self.k):
            self.guard_note = (
                "escape test at substep boundaries only: tau/k exceeds "
                "eps/||A0||, intra-substep excursions not separately covered"
            )
        else:
            self.guard_note = None

    def __call__(self, cell: int, u_idx: int):
        c = self.cover.center(cell)
        u = self.inputs.representatives[u_idx]
        res = attain_over(
            self.sys, (c, self.r0), u, self.k, self.theta, self.gamma,
            self.cover.max_diameter, self.substeps, self.max_splits,
        )
        found = set()
        escaped = res.escaped
        for lo, hi in zip(*res.union.bounding_boxes()):
            cells, esc = self.cover.cells_overlapping_box(lo, hi)
            found.update(cells)
            escaped = escaped or esc
        return sorted(found), escaped, res.slack

    def batch_ranges(self, u_idx: int):
        u = self.inputs.representatives[u_idx]
        lo_b, hi_b, escaped, slack = attain_over_batch(
            self.sys, self.cover.centers_all(), self.r0, u, self.k, self.theta,
            self.gamma, self.cover.max_diameter, self.substeps, self.max_splits,
        )
        branches = []
        for lo, hi in zip(lo_b, hi_b):
            lo_idx, hi_idx, esc, empty = self.cover.box_index_ranges(lo, hi)
            escaped = escaped | esc
            branches.append((lo_idx, hi_idx, empty))
        return branches, escaped, slack

    def sample_endpoints(self, cell: int, u_idx: int, rng, count: int):
        """Monte-Carlo under-approximation of the attainable set: endpoints of
        perturbed trajectories from random points of the cell."""
        from .simulate import perturbed_step  # local import to stay decoupled

        c = self.cover.center(cell)
        lo = np.maximum(c - self.cover.eta / 2, self.cover.lower)
        hi = np.minimum(c + self.cover.eta / 2, self.cover.upper)
        u = self.inputs.representatives[u_idx]
        out = []
        for i in range(count):
            x0 = rng.uniform(lo, hi) if i else c
            d = rng.uniform(-self.sys.w, self.sys.w, size=(4 * self.k, self.sys.dim))
            out.append(perturbed_step(self.sys, x0, u, d, self.substeps))
        return np.array(out)


class MapReach:
    """Exact-image transition callback for discrete interval maps."""

    def __init__(self, plant, cover: GridCover):
        self.plant = plant
        self.cover = cover
        self.guard_note = None
        # two outward ulps per endpoint keep the float image a superset
        self.slack = 4.0 * np.finfo(float).eps

    def _image(self, cell: int):
        lo, hi = self.cover.cell_bounds(cell)
        return self.plant.image_of_box(lo, hi)

    def __call__(self, cell: int, u_idx: int):
        lo, hi = self._image(cell)
        cells, escaped = self.cover.cells_overlapping_box(lo, hi)
        return cells, escaped, self.slack

    def batch_ranges(self, u_idx: int):
        n = self.cover.n_cells
        los = np.empty((n, self.cover.dim))
        his = np.empty((n, self.cover.dim))
        for cell in range(n):
            los[cell], his[cell] = self._image(cell)
        lo_idx, hi_idx, escaped, empty = self.cover.box_index_ranges(los, his)
        return [(lo_idx, hi_idx, empty)], escaped, self.slack

    def sample_endpoints(self, cell: int, u_idx: int, rng, count: int):
        lo, hi = self.cover.cell_bounds(cell)
        xs = np.concatenate([np.linspace(lo[0], hi[0], max(count, 2)), [lo[0], hi[0]]])
        return self.plant.step(xs)[:, None]


def _expand_ranges(cover: GridCover, lo_idx, hi_idx, active):
    """Flat successor ids for the index blocks of the active cells, plus the
    cell id each successor belongs to and the per-cell counts."""
    spans = hi_idx - lo_idx + 1
    cnt = np.where(active, spans.prod(axis=1), 0)
    total = int(cnt.sum())
    if total == 0:
        return np.empty(0, np.int64), np.empty(0, np.int64), cnt
    owner = np.repeat(np.arange(cover.n_cells), cnt)
    offs = np.arange(total, dtype=np.int64) - np.repeat(np.cumsum(cnt) - cnt, cnt)
    flat = np.zeros(total, dtype=np.int64)
    rem = offs
    for axis in range(cover.dim - 1, -1, -1):
        span_rep = spans[owner, axis]
        local = rem % span_rep
        rem = rem // span_rep
        flat += (lo_idx[owner, axis] + local) * int(cover._strides[axis])
    return flat, owner, cnt


def build_abstraction(transitions, cover: GridCover, inputs: InputGrid, costs: AbstractCosts, workers: int = 1):
    """Assemble the finite abstraction from a transition over-approximator.

    ``transitions`` is either a per-pair callable (cell, input) ->
    (successor cells, escaped, slack) or an object providing
    ``batch_ranges(input)`` covering all cells at once.
    """
    n_states = cover.n_states
    m = len(inputs)
    overflow = cover.overflow
    gated = costs.gated
    if hasattr(transitions, "batch_ranges"):
        per_input = _collect_batched(transitions, cover, gated, m, workers)
    else:
        per_input = _collect_per_cell(transitions, cover, gated, m)

    sizes = np.zeros(n_states * m, dtype=np.int64)
    for u_idx, (succ_u, cnt_u, escape_u, _) in enumerate(per_input):
        sizes[np.arange(cover.n_cells) * m + u_idx] = cnt_u + escape_u
    sizes[overflow * m : (overflow + 1) * m] = 1
    trans_ptr = np.zeros(n_states * m + 1, dtype=np.int64)
    np.cumsum(sizes, out=trans_ptr[1:])
    dtype = np.int32 if n_states < 2**31 else np.int64
    trans_succ = np.empty(int(trans_ptr[-1]), dtype=dtype)

    for u_idx, (succ_u, cnt_u, escape_u, _) in enumerate(per_input):
        starts = trans_ptr[np.arange(cover.n_cells, dtype=np.int64) * m + u_idx]
        if len(succ_u):
            offs = np.arange(len(succ_u), dtype=np.int64) - np.repeat(
                np.cumsum(cnt_u) - cnt_u, cnt_u
            )
            trans_succ[np.repeat(starts, cnt_u) + offs] = succ_u
        esc_cells = np.nonzero(escape_u)[0]
        trans_succ[starts[esc_cells] + cnt_u[esc_cells]] = overflow
    trans_succ[trans_ptr[overflow * m : (overflow + 1) * m]] = overflow

    pair_costs = np.full(n_states * m, INF)
    grid_pids = (np.arange(cover.n_cells, dtype=np.int64)[:, None] * m + np.arange(m)).ravel()
    pair_costs[grid_pids] = np.where(
        costs.g_finite[:, None], costs.input_values[None, :], INF
    ).ravel()

    problem = FiniteProblem(n_states, m, costs.G2, trans_ptr, trans_succ, pair_costs=pair_costs)
    cert = ConservatismCertificate(
        input_radius=inputs.radius,
        terminal_slack=costs.terminal_slack,
        running_slack=costs.running_slack,
        transition_slack=max(entry[3] for entry in per_input),
        cell_diameter=cover.max_diameter,
    )
    guard_note = getattr(transitions, "guard_note", None)
    if guard_note:
        cert.notes.append(guard_note)
    cert.notes.append("gamma is a trusted numerical-error budget (unverified)")
    return problem, cert


def _collect_per_cell(callback, cover, gated, m):
    per_input = []
    for u_idx in range(m):
        succ_all = []
        cnt = np.zeros(cover.n_cells, dtype=np.int64)
        escape = np.zeros(cover.n_cells, dtype=bool)
        slack_u = 0.0
        for cell in range(cover.n_cells):
            if gated[cell]:
                escape[cell] = True  # single transition to overflow
                continue
            cells, escaped, slack = callback(cell, u_idx)
            slack_u = max(slack_u, slack)
            if not cells and not escaped:
                raise SoundnessAlarm(
                    f"transition callback returned an empty set for cell {cell}"
                )
            succ_all.extend(cells)
            cnt[cell] = len(cells)
            escape[cell] = escaped
        per_input.append((np.asarray(succ_all, dtype=np.int64), cnt, escape, slack_u))
    return per_input


def _collect_batched(transitions, cover, gated, m, workers):
    def one(u_idx):
        branches, escaped, slack = transitions.batch_ranges(u_idx)
        active_base = ~gated
        if len(branches) == 1:
            lo_idx, hi_idx, empty = branches[0]
            flat, owner, cnt = _expand_ranges(cover, lo_idx, hi_idx, active_base & ~empty)
        else:
            parts = []
            owners = []
            for lo_idx, hi_idx, empty in branches:
                f, o, _ = _expand_ranges(cover, lo_idx, hi_idx, active_base & ~empty)
                parts.append(f)
                owners.append(o)
            # branch boxes may overlap: dedupe successors per cell
            key = np.concatenate(owners) * np.int64(cover.n_states) + np.concatenate(parts)
            uniq = np.unique(key)
            owner = uniq // cover.n_states
            flat = uniq % cover.n_states
            cnt = np.bincount(owner, minlength=cover.n_cells).astype(np.int64)
        if np.any((cnt == 0) & ~escaped & active_base):
            raise SoundnessAlarm("transition callback produced an empty successor set")
        return flat, cnt, escaped | gated, float(slack)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, range(m)))
    return [one(u) for u in range(m)]


def check_conservatism(problem2: FiniteProblem, cover: GridCover, inputs: InputGrid, costs: AbstractCosts, sampler, rho: float, rng, cell_samples: int = 40, endpoint_samples: int = 48, margin: float = None, max_violations: int = 100):
    """Sampled validation of the conservatism conditions against rho.

    ``sampler(cell, input, rng, count)`` must return attainable endpoints (an
    under-approximation of the true attainable set).  Condition (iv) is
    checked with an extra ``margin`` (default ||eta||) absorbing the coverage
    gap of the sample cloud; a pass is conclusive, a reported violation may in
    rare cases be an artifact of sparse sampling.
    """
    margin = cover.max_diameter if margin is None else margin
    model = costs.model
    violations = []

    def add(tag, detail):
        if len(violations) < max_violations:
            violations.append((tag, detail))

    if inputs.radius > rho:
        add("i", f"input covering radius {inputs.radius} > rho {rho}")

    n_check = min(cell_samples, cover.n_cells)
    cells = np.unique(rng.choice(cover.n_cells, size=n_check, replace=False))
    for cell in cells:
        lo, hi = cover.cell_bounds(cell)
        gated = model.cell_all_infinite(lo, hi)
        pts = [cover.center(cell)] + [rng.uniform(lo, hi) for _ in range(6)]
        pts += [lo.copy(), hi.copy()]
        if costs.G2[cell] < INF:
            sup_G1 = max(model.G(p) for p in pts)
            if costs.G2[cell] > rho + sup_G1:
                add("ii", f"cell {cell}: G2 {costs.G2[cell]} > rho + sampled sup G1 {sup_G1}")
        for u_idx in range(len(inputs)):
            val = costs.pair_value(cell, u_idx)
            if val < INF:
                u = inputs.representatives[u_idx]
                sup_g1 = max(model.g(p, p, u) for p in pts)
                if val > rho + sup_g1:
                    add("iii", f"cell {cell}, input {u_idx}: g2 {val} > rho + sampled sup g1 {sup_g1}")
        if gated:
            continue
        diam = float((hi - lo).max())
        if diam > rho * (1.0 + 1e-12):  # ulp slack: bounds are re-derived floats
            add("v", f"cell {cell}: diameter {diam} > rho {rho}")
        for u_idx in range(len(inputs)):
            endpoints = sampler(cell, u_idx, rng, endpoint_samples)
            succ, _ = problem2.successors(int(cell), u_idx)
            for q in succ:
                if q == cover.overflow:
                    continue
                q_lo, q_hi = cover.cell_bounds(int(q))
                gaps = np.maximum(np.maximum(q_lo - endpoints, endpoints - q_hi), 0.0)
                d = float(gaps.max(axis=1).min())
                if d > rho + margin:
                    add("iv", f"cell {cell}, input {u_idx}: successor {q} at distance {d} > rho + margin")
    return len(violations) == 0, violations


def abstraction_sidecar_text(cover: GridCover, inputs: InputGrid, cert: ConservatismCertificate) -> str:
    lines = ["symoc-abstraction v1"]
    lines.extend(cover.geometry_lines())
    lines.extend(inputs.geometry_lines())
    lines.append(f"overflow = {cover.overflow}")
    lines.extend(cert.to_lines())
    return "\n".join(lines) + "\n"
