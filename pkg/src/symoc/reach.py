"""Attainable-set over-approximation for sampled perturbed plants.

One sampling period tau is processed in k substeps.  Per substep, each
hyper-interval (center, radius) is propagated by integrating the nominal
vector field from the center and the growth-bound radius dynamics
r' = A1 r + w from the radius; gamma is added to every radius component per
substep as a trusted budget for integration and rounding errors.  Intervals
wider than theta * ||eta|| are bisected along their widest axis.

The returned union over-approximates the attainable set of the perturbed
plant provided the bounds A0, A1 are valid on the safety hull (all trajectory
segments from the domain stay inside it by construction of the hull).  The
reported slack bounds the distance from any point of the union to the true
attainable set: per interval it is ||r + b|| where b tracks how far the
interval's center may have drifted from an attainable point (zero until a
bisection re-centers it; afterwards propagated through the disturbance-free
growth dynamics, since nominal trajectories diverge no faster).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, SoundnessAlarm

log = logging.getLogger(__name__)


def rk4(f, x0, t, steps):
    """Classical fixed-step Runge-Kutta; x0 may carry leading batch axes."""
    x = np.asarray(x0, dtype=float)
    h = t / steps
    for _ in range(steps):
        k1 = f(x)
        k2 = f(x + 0.5 * h * k1)
        k3 = f(x + 0.5 * h * k2)
        k4 = f(x + h * k3)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return x


@dataclass
class SampledSystem:
    """Sampled perturbed plant x' in f(x,u) + [-w, w] with certified bounds.

    ``f(x, u)`` must be vectorized over a leading batch axis of x.  A0 bounds
    |f| + w on the safety hull, A1 bounds the Jacobian of f there (signed on
    the diagonal, absolute off-diagonal), K is the domain box and Kprime the
    hull K expanded by ``kprime_margin`` per axis.
    """

    f: callable
    w: np.ndarray
    tau: float
    A0: np.ndarray
    A1: np.ndarray
    k_lower: np.ndarray
    k_upper: np.ndarray
    kprime_margin: float
    eps: float
    name: str = "system"
    dim: int = field(init=False)

    def __post_init__(self):
        self.w = np.atleast_1d(np.asarray(self.w, dtype=float))
        self.A0 = np.atleast_1d(np.asarray(self.A0, dtype=float))
        self.A1 = np.asarray(self.A1, dtype=float)
        self.k_lower = np.atleast_1d(np.asarray(self.k_lower, dtype=float))
        self.k_upper = np.atleast_1d(np.asarray(self.k_upper, dtype=float))
        self.dim = self.w.size
        if self.tau <= 0:
            raise InputError("sampling time must be positive")
        if np.any(self.w < 0) or np.any(self.A0 < 0):
            raise InputError("w and A0 must be non-negative")
        if self.A1.shape != (self.dim, self.dim):
            raise InputError("A1 must be square of the state dimension")
        off = self.A1 - np.diag(np.diag(self.A1))
        if np.any(off < 0):
            raise InputError("A1 off-diagonal entries must be non-negative")
        if self.eps <= 0 or self.kprime_margin <= 0:
            raise InputError("eps and the hull margin must be positive")
        # every solution from K stays in K' over one sampling period
        if self.tau * float(self.A0.max()) > self.kprime_margin:
            raise InputError(
                "hull too small: tau * ||A0|| exceeds the K' margin, so "
                "trajectories from the domain may leave the safety hull"
            )

    @property
    def hull_lower(self):
        return self.k_lower - self.kprime_margin - self.eps

    @property
    def hull_upper(self):
        return self.k_upper + self.kprime_margin + self.eps

    def substep_escape_guard_ok(self, k: int) -> bool:
        """Whether intra-substep excursions provably stay within the eps
        margin between the substep-boundary escape checks."""
        return self.tau / k <= self.eps / float(self.A0.max())


def integrate_nominal(sys: SampledSystem, x0, u, t, substeps):
    """Nominal flow (disturbance excluded) of x' = f(x, u) over time t."""
    if t <= 0 or substeps < 1:
        raise InputError("need t > 0 and substeps >= 1")
    out = rk4(lambda x: sys.f(x, u), x0, t, substeps)
    if not np.all(np.isfinite(out)):
        raise SoundnessAlarm("nominal integration diverged")
    return out


def growth_bound(sys: SampledSystem, r0, t, substeps, with_disturbance=True):
    """Radius dynamics r' = A1 r + w integrated over time t; never negative."""
    r0 = np.asarray(r0, dtype=float)
    if np.any(r0 < 0):
        raise InputError("radius must be non-negative")
    w = sys.w if with_disturbance else np.zeros(sys.dim)
    out = rk4(lambda r: r @ sys.A1.T + w, r0, t, substeps)
    if not np.all(np.isfinite(out)):
        raise SoundnessAlarm("growth-bound integration diverged")
    return np.maximum(out, 0.0)


@dataclass
class IntervalUnion:
    """Finite union of hyper-intervals given as centers +- radii."""

    centers: np.ndarray  # (N, dim)
    radii: np.ndarray  # (N, dim)

    def __post_init__(self):
        self.centers = np.atleast_2d(np.asarray(self.centers, dtype=float))
        self.radii = np.atleast_2d(np.asarray(self.radii, dtype=float))
        if self.centers.shape != self.radii.shape or np.any(self.radii < 0):
            raise InputError("malformed interval union")

    def __len__(self):
        return len(self.centers)

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.any(np.all(np.abs(x - self.centers) <= self.radii, axis=1)))

    def total_volume(self) -> float:
        return float(np.prod(2.0 * self.radii, axis=1).sum())

    def bounding_boxes(self):
        return self.centers - self.radii, self.centers + self.radii


@dataclass
class ReachResult:
    union: IntervalUnion
    slack: float  # bound on sup over the union of the distance to the true set
    escaped: bool  # some interval left the safety hull, or the split cap hit


def _split_widest(c, r, b):
    j = int(np.argmax(r))
    shift = np.zeros_like(r)
    shift[j] = r[j] / 2.0
    r2 = r.copy()
    r2[j] = r[j] / 2.0
    return [(c - shift, r2, b + shift), (c + shift, r2, b + shift)]


def attain_over(sys: SampledSystem, cell, u, k, theta, gamma, eta_norm, substeps=5, max_splits=64):
    """Over-approximate the attainable set from a cell under constant input u.

    ``cell`` is (center, radius); ``eta_norm`` is the cover's cell width used
    in the subdivision threshold theta * eta_norm.
    """
    if k < 1 or theta <= 0 or gamma < 0:
        raise InputError("need k >= 1, theta > 0, gamma >= 0")
    c0, r0 = (np.asarray(v, dtype=float) for v in cell)
    work = [(c0, r0, np.zeros(sys.dim))]
    threshold = theta * eta_norm
    t_sub = sys.tau / k
    escaped = False
    for _ in range(k):
        moved = []
        for c, r, b in work:
            c2 = integrate_nominal(sys, c, u, t_sub, substeps)
            r2 = growth_bound(sys, r, t_sub, substeps) + gamma
            b2 = growth_bound(sys, b, t_sub, substeps, with_disturbance=False)
            if np.any(c2 - r2 < sys.hull_lower) or np.any(c2 + r2 > sys.hull_upper):
                escaped = True
            moved.append((c2, r2, b2))
        work = []
        queue = moved
        while queue:
            c, r, b = queue.pop()
            if float(r.max()) > threshold:
                if len(work) + len(queue) + 2 > max_splits:
                    log.warning("split cap hit for input %s; routing to overflow", u)
                    escaped = True
                    work.append((c, r, b))
                    work.extend(queue)
                    queue = []
                    break
                queue.extend(_split_widest(c, r, b))
            else:
                work.append((c, r, b))
    union = IntervalUnion(
        np.array([c for c, _, _ in work]), np.array([r for _, r, _ in work])
    )
    slack = max(float((r + b).max()) for _, r, b in work)
    return ReachResult(union, slack, escaped)


def attain_over_batch(sys: SampledSystem, centers, r0, u, k, theta, gamma, eta_norm, substeps=5, max_splits=64):
    """attain_over for many cells sharing one initial radius.

    Exploits that the radius dynamics does not depend on the state: all cells
    share the radius trajectory, so bisections trigger for all cells at the
    same substeps and the computation stays a small set of center batches.

    Returns (boxes_lo, boxes_hi, escaped, slack): lists over branches of
    (N, dim) bound arrays, a per-cell escape flag array and the common slack.
    """
    centers = np.asarray(centers, dtype=float)
    n_cells = len(centers)
    r0 = np.asarray(r0, dtype=float)
    threshold = theta * eta_norm
    t_sub = sys.tau / k
    branches = [(centers, r0.copy(), np.zeros(sys.dim))]
    escaped = np.zeros(n_cells, dtype=bool)
    for _ in range(k):
        moved = []
        for cs, r, b in branches:
            cs2 = integrate_nominal(sys, cs, u, t_sub, substeps)
            r2 = growth_bound(sys, r, t_sub, substeps) + gamma
            b2 = growth_bound(sys, b, t_sub, substeps, with_disturbance=False)
            escaped |= np.any(cs2 - r2 < sys.hull_lower, axis=1) | np.any(
                cs2 + r2 > sys.hull_upper, axis=1
            )
            moved.append((cs2, r2, b2))
        branches = []
        queue = moved
        while queue:
            cs, r, b = queue.pop()
            if float(r.max()) > threshold:
                if len(branches) + len(queue) + 2 > max_splits:
                    log.warning("split cap hit for input %s; routing to overflow", u)
                    escaped[:] = True
                    branches.append((cs, r, b))
                    branches.extend(queue)
                    break
                j = int(np.argmax(r))
                shift = np.zeros_like(r)
                shift[j] = r[j] / 2.0
                r2 = r.copy()
                r2[j] = r[j] / 2.0
                queue.append((cs - shift, r2, b + shift))
                queue.append((cs + shift, r2, b + shift))
            else:
                branches.append((cs, r, b))
    boxes_lo = [cs - r for cs, r, _ in branches]
    boxes_hi = [cs + r for cs, r, _ in branches]
    slack = max(float((r + b).max()) for _, r, b in branches)
    return boxes_lo, boxes_hi, escaped, slack
