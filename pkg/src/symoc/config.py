"""Sectioned plain-text configuration for the synthesis pipeline.

A config names one of the registered dynamics and optionally a parameter
preset; every registry default can be overridden key by key.  Vectors are
whitespace-separated, boxes use ";" between the lower and upper corner, and
set primitives compose with "|" (union) and a leading "complement".

Example::

    [system]
    dynamics = pendulum
    preset = p1

    [solve]
    queue = auto
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass

import numpy as np

from .core import CostModel, cost_model
from .errors import InputError
from .grid import GridCover, InputGrid, build_grid_cover, discretize_inputs
from .sets import Box, Complement, EmptySet, QuadraticSublevel, SetPredicate, UnionSet
from .systems import LogisticMap, SystemSpec, get_system

_SECTIONS = {"system", "grid", "inputs", "costs", "reach", "solve"}
_KEYS = {
    "system": {"dynamics", "preset", "tau", "w", "A0", "A1", "A2", "A3", "K", "Kprime_margin", "eps"},
    "grid": {"eta"},
    "inputs": {"U", "mu"},
    "costs": {"cost_kind", "target", "obstacle"},
    "reach": {"k", "theta", "gamma", "substeps", "max_splits"},
    "solve": {"queue", "workers"},
}


def _vector(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split()])
    except ValueError as exc:
        raise InputError(f"expected a numeric vector, got {text!r}") from exc


def _corners(text: str):
    parts = text.split(";")
    if len(parts) != 2:
        raise InputError(f"expected 'lower ; upper', got {text!r}")
    lo, hi = _vector(parts[0]), _vector(parts[1])
    if lo.shape != hi.shape:
        raise InputError(f"corner dimension mismatch in {text!r}")
    return lo, hi


def parse_set(text: str, domain_box) -> SetPredicate:
    text = text.strip()
    if text == "none":
        return EmptySet()
    if text == "complement_domain":
        return Complement(Box(domain_box[0], domain_box[1], open_=True))
    if text.startswith("complement "):
        return Complement(parse_set(text[len("complement "):], domain_box))
    if "|" in text:
        return UnionSet([parse_set(p, domain_box) for p in text.split("|")])
    fields = text.split(None, 1)
    if len(fields) != 2:
        raise InputError(f"malformed set primitive {text!r}")
    kind, rest = fields
    if kind in ("interval", "box"):
        lo, hi = _corners(rest)
        return Box(lo, hi, open_=(kind == "interval"))
    if kind == "quadratic":
        parts = rest.split(";")
        if len(parts) != 3:
            raise InputError(f"quadratic needs 'Q ; b ; c', got {text!r}")
        q = _vector(parts[0])
        b = _vector(parts[1])
        n = b.size
        if q.size != n * n:
            raise InputError("quadratic Q must be row-major n*n")
        c = _vector(parts[2])
        if c.size != 1:
            raise InputError("quadratic level must be a single number")
        return QuadraticSublevel(q.reshape(n, n), b, float(c[0]))
    raise InputError(f"unknown set primitive {kind!r}")


@dataclass
class PipelineConfig:
    name: str
    kind: str  # "ode" or "map"
    plant: object  # SampledSystem or discrete map
    cover: GridCover
    inputs: InputGrid
    model: CostModel
    A2: float
    A3: float
    k: int
    theta: float
    gamma: float
    substeps: int
    max_splits: int
    queue: str
    workers: int

    def queue_for(self, problem) -> str:
        from .solver import is_discrete_cost

        if self.queue != "auto":
            return self.queue
        return "fifo" if is_discrete_cost(problem) is not None else "heap"


def _preset_of(spec: SystemSpec, raw):
    name = raw.get("system", "preset", fallback=None)
    if name is None:
        return None
    if name not in spec.presets:
        raise InputError(f"unknown preset {name!r} for {spec.name!r}; have {sorted(spec.presets)}")
    return name


def load_config(path) -> PipelineConfig:
    raw = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw.read_file(fh)
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise InputError(f"malformed config {path}: {exc}") from exc
    for section in raw.sections():
        if section not in _SECTIONS:
            raise InputError(f"unknown config section [{section}]")
        for key in raw[section]:
            if key not in {k.lower() for k in _KEYS[section]}:
                raise InputError(f"unknown key {key!r} in section [{section}]")
    if not raw.has_option("system", "dynamics"):
        raise InputError("config needs dynamics under [system]")
    spec = get_system(raw.get("system", "dynamics"))
    preset = _preset_of(spec, raw)

    def get(section, key, fallback=None):
        return raw.get(section, key, fallback=fallback)

    k_lower, k_upper = spec.k_lower, spec.k_upper
    if get("system", "K"):
        k_lower, k_upper = _corners(get("system", "K"))

    eta = mu = kk = None
    gamma = None
    if preset is not None:
        eta, mu, kk = spec.presets[preset]
        gamma = spec.preset_gamma[preset]
    if get("grid", "eta"):
        eta = _vector(get("grid", "eta"))
    if get("inputs", "mu"):
        mu = _vector(get("inputs", "mu"))
    if get("reach", "k"):
        kk = int(get("reach", "k"))
    if get("reach", "gamma"):
        gamma = float(get("reach", "gamma"))
    if eta is None or mu is None:
        raise InputError("need eta and mu (directly or via a preset)")
    if kk is None:
        kk = 1
    if gamma is None:
        gamma = 0.0

    pieces = spec.input_pieces
    if get("inputs", "U"):
        pieces = []
        for part in get("inputs", "U").split("|"):
            pieces.append(_corners(part))

    cost_kind = get("costs", "cost_kind", spec.cost_kind)
    target = spec.target
    obstacle = spec.obstacle
    if get("costs", "target"):
        target = parse_set(get("costs", "target"), (k_lower, k_upper))
    if get("costs", "obstacle"):
        obstacle = parse_set(get("costs", "obstacle"), (k_lower, k_upper))
    model = cost_model(cost_kind, target, obstacle)

    cover = build_grid_cover((k_lower, k_upper), eta)
    inputs = discretize_inputs(pieces, mu)

    if spec.kind == "map":
        plant = LogisticMap()
    else:
        from .reach import SampledSystem

        plant = SampledSystem(
            f=spec.field_builder(),
            w=_vector(get("system", "w")) if get("system", "w") else spec.w,
            tau=float(get("system", "tau", spec.tau)),
            A0=_vector(get("system", "A0")) if get("system", "A0") else spec.A0,
            A1=_vector(get("system", "A1")).reshape(len(k_lower), len(k_lower))
            if get("system", "A1")
            else spec.A1,
            k_lower=k_lower,
            k_upper=k_upper,
            kprime_margin=float(get("system", "Kprime_margin", spec.kprime_margin)),
            eps=float(get("system", "eps", spec.eps)),
            name=spec.name,
        )

    queue = get("solve", "queue", "auto")
    if queue not in ("auto", "heap", "fifo"):
        raise InputError(f"queue must be auto, heap or fifo, not {queue!r}")
    return PipelineConfig(
        name=spec.name,
        kind=spec.kind,
        plant=plant,
        cover=cover,
        inputs=inputs,
        model=model,
        A2=float(get("system", "A2", spec.A2)),
        A3=float(get("system", "A3", spec.A3)),
        k=kk,
        theta=float(get("reach", "theta", spec.theta)),
        gamma=gamma,
        substeps=int(get("reach", "substeps", 5)),
        max_splits=int(get("reach", "max_splits", 64)),
        queue=queue,
        workers=int(get("solve", "workers", 1)),
    )
