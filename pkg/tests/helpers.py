"""Scene builders and random scene generation shared by the test modules."""

from __future__ import annotations

import random
from pathlib import Path

from slcnc.compiler import Scene, compile_program
from slcnc.errors import OutOfWorkspace
from slcnc.gcode import parse_program
from slcnc.heap import heap_from_assertion
from slcnc.prover import execute

SCENES = Path(__file__).resolve().parent.parent / "scenes"


def box(lo, hi):
    return {"min": list(lo), "max": list(hi)}


def line_scene(length, env=(), stock=(), home=0):
    """A 1-D workspace ``{0..length}`` along X with a point tool."""
    return Scene.from_dict(
        {
            "workspace": box((0, 0, 0), (length, 0, 0)),
            "tool": {"voxels": [[0, 0, 0]]},
            "home": [home, 0, 0],
            "env": [box((x, 0, 0), (x, 0, 0)) for x in env],
            "stock": [box((x, 0, 0), (x, 0, 0)) for x in stock],
        }
    )


def case_study_scene():
    return Scene.load(SCENES / "case_study.json")


def run(scene, text, **kw):
    triple = compile_program(scene, parse_program(text), kw.pop("path_mode", "bresenham"))
    return triple, execute(triple, heap_from_assertion(triple.pre), **kw)


def random_box(rng, size):
    lo = [rng.randrange(s) for s in size]
    hi = [min(s - 1, a + rng.randrange(3)) for a, s in zip(lo, size)]
    return lo, hi


def random_scene(rng: random.Random, max_cmds: int = 8):
    """A small random scene plus a program over it.

    Returns ``(scene_dict, program_text)``.  Workspaces stay under 20^3; the
    tool is a point or a short bar, optionally dilated by one voxel.
    """
    size = [rng.randint(5, 10), rng.randint(4, 9), rng.randint(1, 4)]
    eps = 1 if rng.random() < 0.2 and min(size) >= 3 else 0
    tool = [[0, 0, 0]]
    if rng.random() < 0.3:
        tool.append([1, 0, 0])
    tmax = [max(t[i] for t in tool) + eps for i in range(3)]
    tmin = [-eps] * 3
    cells = set()
    env, stock = [], []
    for kind, out in (("env", env), ("stock", stock)):
        for _ in range(rng.randint(0, 3)):
            lo, hi = random_box(rng, size)
            vox = {
                (x, y, z)
                for x in range(lo[0], hi[0] + 1)
                for y in range(lo[1], hi[1] + 1)
                for z in range(lo[2], hi[2] + 1)
            }
            if vox & cells:
                continue
            cells |= vox
            out.append(box(lo, hi))
    span_lo = [-m for m in tmin]
    span_hi = [s - 1 - m for s, m in zip(size, tmax)]
    if any(a > b for a, b in zip(span_lo, span_hi)):
        eps = 0
        tool = [[0, 0, 0]]
        span_lo, span_hi = [0, 0, 0], [s - 1 for s in size]

    def placed(p):
        return {
            (p[0] + t[0] + dx, p[1] + t[1] + dy, p[2] + t[2] + dz)
            for t in tool
            for dx in range(-eps, eps + 1)
            for dy in range(-eps, eps + 1)
            for dz in range(-eps, eps + 1)
        }

    home = None
    for _ in range(50):
        cand = [rng.randint(a, b) for a, b in zip(span_lo, span_hi)]
        if not placed(cand) & cells:
            home = cand
            break
    if home is None:
        env, stock = [], []
        home = list(span_lo)

    mu = rng.choice((1, 1, 2))
    lines = []
    for i in range(rng.randint(1, max_cmds)):
        target = [rng.randint(a, b) for a, b in zip(span_lo, span_hi)]
        axes = [ax for ax in "XYZ" if rng.random() < 0.7] or ["X"]
        words = " ".join(f"{ax}{_unit(target['XYZ'.index(ax)], mu, rng)}" for ax in axes)
        if rng.random() < 0.1:
            ax = rng.choice("XYZ")
            lines.append(f"{ax} = {_unit(target['XYZ'.index(ax)], mu, rng)}")
            continue
        code = rng.choice(("G00", "G01", "G01"))
        feed = " F100" if code == "G01" and rng.random() < 0.5 else ""
        lines.append(f"N{(i + 1) * 10} {code} {words}{feed}")
    scene = {
        "workspace": box((0, 0, 0), [(s - 1) for s in size]),
        "mu": 1,
        "epsilon": eps,
        "tool": {"voxels": tool},
        "home": home,
        "env": env,
        "stock": stock,
    }
    if mu == 2:
        # same grid, expressed in half units
        scene["mu"] = 2
        scene["workspace"] = box((0, 0, 0), [(s - 1) / 2 for s in size])
        scene["home"] = [h / 2 for h in home]
        for b in env + stock:
            b["min"] = [v / 2 for v in b["min"]]
            b["max"] = [v / 2 for v in b["max"]]
    return scene, "\n".join(lines) + "\n"


def _unit(v, mu, rng):
    if mu == 1:
        return str(v)
    # any value in [v/2, (v+1)/2) floors onto voxel v
    return str(v / 2 + rng.choice((0, 0.25)))


def random_runs(seed, n):
    """``n`` random scenes that compile, as ``(scene, text, triple)``."""
    rng = random.Random(seed)
    out = []
    while len(out) < n:
        scene_d, text = random_scene(rng)
        scene = Scene.from_dict(scene_d)
        try:
            triple = compile_program(scene, parse_program(text))
        except OutOfWorkspace:
            continue
        out.append((scene, text, triple))
    return out


def with_fixture(scene: Scene, cells) -> Scene:
    """The same scene with extra single-voxel environment boxes at ``cells`` (grid units)."""

    def b(x):
        return {"min": list(x.lo), "max": list(x.hi)}

    return Scene.from_dict(
        {
            "workspace": b(scene.workspace),
            "mu": scene.mu,
            "epsilon": scene.epsilon,
            "tool": {"voxels": [list(c) for c in scene.tool_voxels]},
            "home": list(scene.home),
            "env": [b(x) for x in scene.env] + [box([v / scene.mu for v in c], [v / scene.mu for v in c]) for c in cells],
            "stock": [b(x) for x in scene.stock],
        }
    )
