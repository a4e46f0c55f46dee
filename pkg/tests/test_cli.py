import hashlib
import os

import numpy as np
import pytest

from symoc.cli import main
from symoc.config import load_config, parse_set
from symoc.core import INF, FiniteProblem, values_from_text
from symoc.errors import InputError
from symoc.relations import Relation
from symoc.sets import Box, Complement, EmptySet, QuadraticSublevel, UnionSet

REPO = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
CONFIGS = os.path.join(REPO, "configs")

# pinned from the first run of the logistic N=40 pipeline (golden files)
GOLDEN = {
    "a.values": "dbaa06a18ccfb77b8af5257cc3a370c9ce85737e18a979e9b3626334a2e51c03",
    "a.controller": "07f7ef9b6b05fcd75de79829ec8c46f008acf57e5360cb4d4713477638d5077c",
    "a.sidecar": "2fa7cdbb23d62434834ffc31473c6556141559aad73e87bae94adb8110b90d74",
    "s.traj000.csv": "f084976453715203b2a4ff7e4e8447989570abf1fbafcb86d66b7cc07c546658",
    "s.report": "7f8c0222751645d426b2b579cce15ba2a9fa4ed7d031eecfc02dc0e009a8d58d",
}


def sha(path):
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def test_config_loads_shipped_presets():
    cfg = load_config(os.path.join(CONFIGS, "pendulum_p1.ini"))
    assert cfg.name == "pendulum"
    assert cfg.cover.counts.tolist() == [158, 76]
    assert len(cfg.inputs) == 21
    assert cfg.k == 1 and cfg.gamma == 6.3e-7
    cfg = load_config(os.path.join(CONFIGS, "chauffeur_p1.ini"))
    assert cfg.cover.counts.tolist() == [334, 334]
    assert len(cfg.inputs) == 11
    assert cfg.theta == 2.0


def test_config_overrides_and_rejections(tmp_path):
    good = tmp_path / "ok.ini"
    good.write_text(
        "[system]\ndynamics = logistic\n[grid]\neta = 0.01\n[inputs]\nmu = 1.0\n"
        "[costs]\ntarget = interval 0.4 ; 0.7\n"
    )
    cfg = load_config(good)
    assert cfg.cover.counts.tolist() == [101]
    assert isinstance(cfg.model.target, Box) and cfg.model.target.open

    bad = tmp_path / "bad.ini"
    bad.write_text("[system]\ndynamics = logistic\n[grid]\nzeta = 0.01\n")
    with pytest.raises(InputError):
        load_config(bad)
    bad.write_text("[system]\ndynamics = warp_drive\n")
    with pytest.raises(InputError):
        load_config(bad)
    bad.write_text("[grid]\neta = 0.1\n")
    with pytest.raises(InputError):
        load_config(bad)
    with pytest.raises(InputError):
        load_config(tmp_path / "missing.ini")


def test_parse_set_primitives():
    dom = (np.array([-1.0, -1.0]), np.array([1.0, 1.0]))
    assert isinstance(parse_set("none", dom), EmptySet)
    comp = parse_set("complement_domain", dom)
    assert isinstance(comp, Complement)
    assert comp.contains([2.0, 0.0]) and not comp.contains([0.0, 0.0])
    quad = parse_set("quadratic 1 0 0 1 ; 0 0 ; 0.9", dom)
    assert isinstance(quad, QuadraticSublevel) and quad.contains([0.0, 0.0])
    union = parse_set("interval -1 ; 0 | box 0.5 ; 1", (np.array([-1.0]), np.array([1.0])))
    assert isinstance(union, UnionSet)
    with pytest.raises(InputError):
        parse_set("blob 1 2", dom)
    with pytest.raises(InputError):
        parse_set("quadratic 1 0 ; 0 0 ; 1", dom)


def test_cli_solve_finite_round_trip(tmp_path):
    problem = FiniteProblem.from_lists(
        [INF, 0.0],
        [[[(1, 1.0)]], [[(1, 0.0)]]],
    )
    focp = tmp_path / "p.focp"
    focp.write_text(problem.to_focp_text())
    rc = main(["solve-finite", str(focp), "--out-prefix", str(tmp_path / "out")])
    assert rc == 0
    W = values_from_text((tmp_path / "out.values").read_text())
    assert W.tolist() == [1.0, 0.0]
    assert (tmp_path / "out.controller").read_text() == "0 0\n1 STOP\n"
    # re-import of the exported problem reproduces the in-memory structure
    back = FiniteProblem.from_focp_text(focp.read_text())
    assert back.to_focp_text() == problem.to_focp_text()


def test_cli_golden_logistic_pipeline(tmp_path):
    cfg = os.path.join(CONFIGS, "logistic_n40.ini")
    rc = main(["synthesize", cfg, "--out-prefix", str(tmp_path / "a")])
    assert rc == 0
    rc = main([
        "simulate", cfg,
        "--controller", str(tmp_path / "a.controller"),
        "--values", str(tmp_path / "a.values"),
        "--x0", "0.2", "--x0", "0.9",
        "--policy", "zero", "--seed", "0", "--verify-samples", "20",
        "--out-prefix", str(tmp_path / "s"),
    ])
    assert rc == 0
    for name, want in GOLDEN.items():
        assert sha(tmp_path / name) == want, f"golden mismatch for {name}"


def test_cli_hypo_logistic(tmp_path):
    cfg = os.path.join(CONFIGS, "logistic_n40.ini")
    assert main(["synthesize", cfg, "--out-prefix", str(tmp_path / "a")]) == 0
    rc = main([
        "hypo", cfg, "--values", str(tmp_path / "a.values"),
        "--samples", "800", "--out-prefix", str(tmp_path / "h"),
    ])
    assert rc == 0
    text = (tmp_path / "h.hypo").read_text()
    assert text.startswith("eps = ")
    assert (tmp_path / "h.hypo_w.csv").read_text().splitlines()[0] == "x,W"


def test_cli_check_relation(tmp_path):
    p = FiniteProblem.from_lists([0.0, 1.0], [[[(1, 1.0)]], [[(1, 0.5)]]])
    (tmp_path / "p.focp").write_text(p.to_focp_text())
    (tmp_path / "rel.txt").write_text(Relation([(0, 0), (1, 1)]).to_text())
    rc = main([
        "check-relation", str(tmp_path / "p.focp"), str(tmp_path / "p.focp"),
        str(tmp_path / "rel.txt"), "--mode", "vfrr",
        "--out", str(tmp_path / "verdict.txt"),
    ])
    assert rc == 0
    assert (tmp_path / "verdict.txt").read_text().startswith("verdict: true")
    rc = main([
        "check-relation", str(tmp_path / "p.focp"), str(tmp_path / "p.focp"),
        str(tmp_path / "rel.txt"), "--mode", "vasr", "--eps", "0.5",
    ])
    assert rc == 0


def test_cli_exit_codes(tmp_path):
    # malformed config -> input error -> exit 1
    bad = tmp_path / "bad.ini"
    bad.write_text("[system]\ndynamics = nope\n")
    assert main(["synthesize", str(bad), "--out-prefix", str(tmp_path / "x")]) == 1

    # corrupting the value file downwards makes simulate flag violations -> exit 2
    cfg = os.path.join(CONFIGS, "logistic_n40.ini")
    assert main(["synthesize", cfg, "--out-prefix", str(tmp_path / "a")]) == 0
    W = values_from_text((tmp_path / "a.values").read_text())
    finite = np.isfinite(W)
    W[finite] = 0.0  # claim everything winning is free
    lines = [f"{p} {'inf' if v == INF else repr(float(v))}" for p, v in enumerate(W)]
    (tmp_path / "a.values").write_text("\n".join(lines) + "\n")
    rc = main([
        "simulate", cfg,
        "--controller", str(tmp_path / "a.controller"),
        "--values", str(tmp_path / "a.values"),
        "--samples", "10", "--policy", "zero", "--seed", "1",
        "--out-prefix", str(tmp_path / "s"),
    ])
    assert rc == 2


def test_cli_rerun_is_byte_identical(tmp_path):
    cfg = os.path.join(CONFIGS, "logistic_n400.ini")
    for tag in ("one", "two"):
        assert main(["synthesize", cfg, "--out-prefix", str(tmp_path / tag)]) == 0
        assert main([
            "simulate", cfg,
            "--controller", str(tmp_path / f"{tag}.controller"),
            "--values", str(tmp_path / f"{tag}.values"),
            "--samples", "6", "--policy", "uniform", "--seed", "9",
            "--out-prefix", str(tmp_path / f"{tag}.sim"),
        ]) == 0
    for suffix in (".values", ".controller", ".sidecar", ".sim.traj000.csv", ".sim.report"):
        assert sha(tmp_path / ("one" + suffix)) == sha(tmp_path / ("two" + suffix))
