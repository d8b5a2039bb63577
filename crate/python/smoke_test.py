#!/usr/bin/env python3
"""Smoke test for the edgesr_py extension module.

Builds nothing itself: expects `cargo build -p edgesr-py [--release]` to
have produced the cdylib under target/. Copies the library into a temp
directory under the importable module name and exercises the bindings.
"""

import pathlib
import shutil
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def locate_cdylib():
    names = ["libedgesr_py.so", "libedgesr_py.dylib", "edgesr_py.dll"]
    candidates = [
        ROOT / "target" / profile / name
        for profile in ("release", "debug")
        for name in names
    ]
    for path in candidates:
        if path.exists():
            return path
    sys.exit(
        "edgesr_py cdylib not found; run `cargo build -p edgesr-py` first\n"
        + "\n".join(f"  looked at {p}" for p in candidates)
    )


def check(name, condition, detail=""):
    status = "ok" if condition else "FAIL"
    print(f"  [{status}] {name}" + (f" ({detail})" if detail else ""))
    if not condition:
        sys.exit(1)


def main():
    cdylib = locate_cdylib()
    tmp = tempfile.mkdtemp(prefix="edgesr-py-")
    suffix = ".pyd" if cdylib.suffix == ".dll" else ".so"
    shutil.copy(cdylib, pathlib.Path(tmp) / f"edgesr_py{suffix}")
    sys.path.insert(0, tmp)
    import edgesr_py as m

    print(f"loaded {cdylib}")

    profile = m.SystemProfile.default()
    fields = profile.to_dict()
    check("profile has 15 fields", len(fields) == 15, str(len(fields)))

    # Calibration reference points: full-image device branch at R=512
    # is ~8.41 s, full-image edge diffusion branch ~125.4 s.
    req = m.Request("smoke", 2048, 0.05, prompt_seed=7)
    cfg = m.Configuration(4, 30)
    device = m.latency_total(req, cfg, 0.0, profile)
    edge = m.latency_total(req, cfg, 1.0, profile)
    check("device branch ~8.41 s", abs(device["t_sr_device"] - 8.41) / 8.41 < 0.05,
          f"{device['t_sr_device']:.3f}")
    check("edge branch ~125.4 s", abs(edge["t_sr_edge"] - 125.4) / 125.4 < 0.05,
          f"{edge['t_sr_edge']:.3f}")

    # Utility identity.
    q = m.quality_final(req, cfg, 0.25, profile)
    t = m.latency_total(req, cfg, 0.25, profile)["total"]
    u = m.utility(q, t, 0.05)
    check("utility = quality - lambda*latency", abs(u - (q - 0.05 * t)) < 1e-12)

    # Annealing tracks the exhaustive oracle on the default grid.
    scales, steps = [1, 2, 4], [10, 20, 30, 40, 50]
    req1024 = m.Request("u", 1024, 0.02, prompt_seed=3)
    best_cfg, best_u = m.brute_force(req1024, 0.25, profile, scales, steps)
    sa_cfg, sa_u = m.anneal(req1024, 0.25, profile, scales, steps, seed=42)
    check("anneal within 1% of brute force", sa_u >= 0.99 * best_u,
          f"sa {sa_u:.4f} vs brute {best_u:.4f}")
    check("brute is an upper bound", sa_u <= best_u + 1e-12)

    # Default scenario.
    report = m.run_default_scenario(seed=42, policy="sa")
    check("ten records", len(report["records"]) == 10)
    check("all feasible", all(r["feasible"] for r in report["records"]))

    # Image path: synth -> partition -> enhance.
    src = pathlib.Path(tmp) / "src.ppm"
    out = pathlib.Path(tmp) / "out.ppm"
    m.synth_image(42, 128, str(src))
    parts = m.partition_image(str(src), grid=4, gamma=0.25)
    check("four foreground cells", len(parts["foreground"]) == 4,
          str(parts["foreground"]))
    dims = m.enhance_image(str(src), str(out), scale=2, gamma=0.25, overlap=8)
    check("enhanced dimensions", dims == (256, 256), str(dims))

    print("smoke test passed")


if __name__ == "__main__":
    main()
