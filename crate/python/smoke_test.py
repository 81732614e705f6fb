#!/usr/bin/env python3
"""Smoke test for the cgl_dg_py bindings.

Builds the extension with cargo, stages the shared object under an
importable name, then exercises every exported entry point with cheap
checks (coarse mesh, one short run). Exits non-zero on the first failure.

Usage: python3 python/smoke_test.py
"""

import math
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

REPO_ROOT = Path(__file__).resolve().parent.parent


def build_and_import():
    subprocess.run(
        ["cargo", "build", "-p", "cgl-dg-py"], cwd=REPO_ROOT, check=True
    )
    built = REPO_ROOT / "target" / "debug" / "libcgl_dg_py.so"
    if not built.exists():  # e.g. macOS
        built = REPO_ROOT / "target" / "debug" / "libcgl_dg_py.dylib"
    stage = Path(tempfile.mkdtemp(prefix="cgl_dg_py_"))
    shutil.copy2(built, stage / "cgl_dg_py.so")
    sys.path.insert(0, str(stage))
    import cgl_dg_py

    return cgl_dg_py


def approx(value, expected, rel):
    return abs(value - expected) <= rel * abs(expected)


def main():
    m = build_and_import()
    failures = []

    def check(name, ok, detail=""):
        print(f"{'ok  ' if ok else 'FAIL'} {name}" + (f"  ({detail})" if detail else ""))
        if not ok:
            failures.append(name)

    # Mesh geometry: n=4 unit square has (n+1)^2 vertices, 2 n^2 elements.
    mesh = m.Mesh(4)
    check(
        "mesh counts",
        mesh.num_vertices == 25 and mesh.num_elements == 32 and mesh.n == 4,
        repr(mesh),
    )
    check("mesh h", approx(mesh.h, math.sqrt(2.0) / 4.0, 1e-12), f"h={mesh.h}")
    check("mesh refine", mesh.refined().n == 8)
    areas = 0.5 * mesh.h**2 / 2.0  # each triangle has area h^2/4 = 1/(2 n^2)
    check(
        "mesh vertices span unit square",
        min(v[0] for v in mesh.vertices()) == 0.0
        and max(v[1] for v in mesh.vertices()) == 1.0,
        f"triangle area should be {areas:.4f}",
    )

    # Exact fields and forcing are consistent with the strong form.
    u1, u2 = m.eval_exact(0.3, 0.7, 0.5)
    check("eval_exact finite", math.isfinite(u1) and math.isfinite(u2), f"({u1}, {u2})")
    f1, f2 = m.eval_forcing(1.0, 1.0, 0.3, 0.7, 0.5)
    check("eval_forcing finite", math.isfinite(f1) and math.isfinite(f2))
    r1, r2 = m.residuals(1.0, 1.0, 0.3, 0.7, 0.5)
    check("strong-form residuals small", max(r1, r2) < 1e-6, f"({r1:.2e}, {r2:.2e})")

    # Closed-form space-time norms.
    n1, n2 = m.exact_norms()
    check(
        "exact norms",
        approx(n1, 0.5694288970418258, 1e-12) and approx(n2, 0.6067679982406179, 1e-12),
        f"({n1}, {n2})",
    )

    # One coarse run reproduces the recorded n=6 norms.
    config = m.RunConfig(method="nipg", a=1e-4, b=1e-4, sigma=1e8, n=6)
    check("config repr", "nipg" in repr(config) and config.dt > 0)
    result = m.run(config)
    check(
        "run norms",
        approx(result.norm_u1, 0.502487, 1e-3) and approx(result.norm_u2, 0.478851, 1e-3),
        repr(result),
    )
    # 9 steps of dt = 1/9 plus the initial record.
    check(
        "run status",
        result.status == "ok" and not result.blown_up and len(result.records) == 10,
        f"status={result.status}, steps={len(result.records)}",
    )
    # Coarse-mesh accuracy: piecewise linears at h ~ 0.24 resolve the
    # oscillatory fields to ~25%; the study checks the convergence rate.
    check("run error plausible", result.err_l2_final < 0.3, f"err={result.err_l2_final:.4f}")

    # Two-level study: error drops, classification stable.
    study = m.study(config, [4, 8])
    rate = study.levels[1].rate
    check(
        "study rate and class",
        study.classification == "stable" and rate is not None and rate > 1.5,
        f"rate={rate}, class={study.classification}",
    )

    # Probe: NIPG Rayleigh quotient against the matching DG norm is 1.
    rayleigh, continuity, defect = m.probe("nipg", 1e3, n=4, trials=16)
    check(
        "probe nipg rayleigh",
        approx(rayleigh, 1.0, 1e-10) and continuity > 0 and defect > 0,
        f"rayleigh={rayleigh}",
    )
    _, _, sipg_defect = m.probe("sipg", 1e3, n=4, trials=16)
    check("probe sipg symmetric", sipg_defect < 1e-14, f"defect={sipg_defect:.2e}")

    # Error paths raise instead of crashing.
    try:
        m.RunConfig(method="upwind")
        check("bad method rejected", False)
    except ValueError as e:
        check("bad method rejected", "upwind" in str(e))
    try:
        m.RunConfig(sigma=-1.0)
        check("bad sigma rejected", False)
    except ValueError:
        check("bad sigma rejected", True)

    if failures:
        print(f"\n{len(failures)} smoke checks failed: {failures}")
        return 1
    print("\nall smoke checks passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
