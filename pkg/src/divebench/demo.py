"""Self-checks for the adapter reference: identity, gradients, loss descent.

Used by the ``mca-demo`` subcommand; output is deterministic for a fixed seed
so two runs are byte-identical. Also reads/writes regression fixture files:
JSON carrying shapes, seeds and the expected fused-output digest.
"""

from __future__ import annotations

import hashlib
import json
from importlib import resources
from pathlib import Path

import numpy as np

from .adapter import (AdapterParams, FeatureMatrix, init_params, mca_backward,
                      mca_forward, param_arrays)
from .diffusion import NoiseSchedule, train_toy_denoiser


def check_zero_init_identity(seed: int, trials: int = 100) -> bool:
    rng = np.random.default_rng(seed)
    for _ in range(trials):
        d_m = int(rng.integers(1, 9))
        d_t = int(rng.integers(1, 9))
        n_i = int(rng.integers(1, 17))
        n_a = int(rng.integers(1, 17))
        n_t = int(rng.integers(1, 9))
        p = init_params(rng, d_m, d_t)
        f_i = FeatureMatrix(rng.standard_normal((n_i, d_m)))
        f_a = FeatureMatrix(rng.standard_normal((n_a, d_m)))
        f_t = FeatureMatrix(rng.standard_normal((n_t, d_t)))
        out = mca_forward(f_i, f_a, f_t, p)
        if out.values.tobytes() != f_t.values.tobytes():
            return False
    return True


def max_gradient_error(seed: int, instances: int = 20, h: float = 1e-5) -> float:
    """Worst relative error of analytic vs central-difference gradients."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        d_m, d_t, n_t = 3, 3, 2
        p = init_params(rng, d_m, d_t)
        # Give the zero-initialized projections nonzero values so their
        # gradient paths are exercised away from the identity point.
        p.z_m.w[:] = rng.standard_normal(p.z_m.w.shape) * 0.3
        p.z_m.b[:] = rng.standard_normal(p.z_m.b.shape) * 0.3
        p.z_t.w[:] = rng.standard_normal(p.z_t.w.shape) * 0.3
        p.z_t.b[:] = rng.standard_normal(p.z_t.b.shape) * 0.3
        f_i = FeatureMatrix(rng.standard_normal((5, d_m)))
        f_a = FeatureMatrix(rng.standard_normal((4, d_m)))
        f_t = FeatureMatrix(rng.standard_normal((n_t, d_t)))
        probe = rng.standard_normal((n_t, d_t))

        def loss() -> float:
            return float((mca_forward(f_i, f_a, f_t, p).values * probe).sum())

        grads = mca_backward(f_i, f_a, f_t, p, probe)
        named = param_arrays(grads.params)
        for (name, arr), (_, g) in zip(param_arrays(p), named):
            flat = arr.ravel()
            gflat = g.ravel()
            for idx in range(flat.size):
                orig = flat[idx]
                flat[idx] = orig + h
                up = loss()
                flat[idx] = orig - h
                down = loss()
                flat[idx] = orig
                numeric = (up - down) / (2 * h)
                denom = max(abs(numeric), abs(gflat[idx]), 1e-6)
                worst = max(worst, abs(numeric - gflat[idx]) / denom)
        for inputs, g in ((f_i, grads.f_i), (f_a, grads.f_a), (f_t, grads.f_t)):
            flat = inputs.values.ravel()
            gflat = g.ravel()
            for idx in range(flat.size):
                orig = flat[idx]
                flat[idx] = orig + h
                up = loss()
                flat[idx] = orig - h
                down = loss()
                flat[idx] = orig
                numeric = (up - down) / (2 * h)
                denom = max(abs(numeric), abs(gflat[idx]), 1e-6)
                worst = max(worst, abs(numeric - gflat[idx]) / denom)
    return worst


def loss_descent(seed: int, steps: int = 200) -> tuple[float, float]:
    rng = np.random.default_rng(seed)
    sched = NoiseSchedule.linear()
    z0 = rng.standard_normal((2, 2, 4, 4))
    p = init_params(rng, 4, 3)
    f_i = FeatureMatrix(rng.standard_normal((6, 4)))
    f_a = FeatureMatrix(rng.standard_normal((5, 4)))
    f_t = FeatureMatrix(rng.standard_normal((3, 3)))
    first, last, _ = train_toy_denoiser(z0, 700, f_i, f_a, f_t, p, sched, rng,
                                        steps=steps)
    return first, last


def _fixture_forward(fixture: dict) -> FeatureMatrix:
    """Rebuild the fixture's adapter pass from its seed and shapes.

    Query tokens are drawn to mirror the full MLLM output but do not enter
    the fusion; the projection layers get seeded nonzero values so the digest
    covers the whole computation, not just the text passthrough.
    """
    rng = np.random.default_rng(fixture["seed"])
    p = init_params(rng, fixture["d_mllm"], fixture["d_text"], fixture.get("hidden"))
    tokens = fixture["tokens"]
    f_q = FeatureMatrix(rng.standard_normal((tokens["query"], fixture["d_mllm"])))
    f_i = FeatureMatrix(rng.standard_normal((tokens["vision"], fixture["d_mllm"])))
    f_a = FeatureMatrix(rng.standard_normal((tokens["answer"], fixture["d_mllm"])))
    f_t = FeatureMatrix(rng.standard_normal((tokens["text"], fixture["d_text"])))
    del f_q  # unused by the fusion, by design
    if not fixture.get("zero_init", False):
        p.z_m.w[:] = rng.standard_normal(p.z_m.w.shape) * 0.1
        p.z_m.b[:] = rng.standard_normal(p.z_m.b.shape) * 0.1
        p.z_t.w[:] = rng.standard_normal(p.z_t.w.shape) * 0.1
        p.z_t.b[:] = rng.standard_normal(p.z_t.b.shape) * 0.1
    return mca_forward(f_i, f_a, f_t, p)


def fused_digest(out: FeatureMatrix) -> str:
    return hashlib.sha256(out.values.tobytes()).hexdigest()


def write_fixture(path: str | Path, seed: int = 0, *, d_mllm: int = 6,
                  d_text: int = 4, tokens: dict | None = None,
                  zero_init: bool = False) -> dict:
    fixture = {
        "seed": seed,
        "d_mllm": d_mllm,
        "d_text": d_text,
        "hidden": None,
        "tokens": tokens or {"query": 3, "vision": 9, "answer": 5, "text": 4},
        "zero_init": zero_init,
    }
    fixture["expected_fc_sha256"] = fused_digest(_fixture_forward(fixture))
    Path(path).write_text(json.dumps(fixture, indent=2) + "\n")
    return fixture


def check_fixture(path: str | Path | None = None) -> bool:
    """Recompute the fused features and compare digests (regression check)."""
    if path is None:
        text = resources.files("divebench.assets").joinpath(
            "mca_fixture.json").read_text()
    else:
        text = Path(path).read_text()
    fixture = json.loads(text)
    return fused_digest(_fixture_forward(fixture)) == fixture["expected_fc_sha256"]


def run_mca_demo(seed: int = 0) -> bool:
    ok = True

    ident = check_zero_init_identity(seed)
    print(f"[{'PASS' if ident else 'FAIL'}] zero-init identity: fused == text "
          f"features bitwise over 100 random instances")
    ok &= ident

    err = max_gradient_error(seed, instances=5)
    grad_ok = err < 1e-4
    print(f"[{'PASS' if grad_ok else 'FAIL'}] gradient check: max relative "
          f"error {err:.3e} (< 1e-4)")
    ok &= grad_ok

    first, last = loss_descent(seed)
    descent_ok = last <= 0.7 * first
    print(f"[{'PASS' if descent_ok else 'FAIL'}] toy denoiser descent: loss "
          f"{first:.6f} -> {last:.6f} ({100 * (1 - last / first):.1f}% drop, "
          f">= 30% required)")
    ok &= descent_ok

    fixture_ok = check_fixture()
    print(f"[{'PASS' if fixture_ok else 'FAIL'}] fixture regression: fused "
          f"feature digest matches the shipped fixture")
    ok &= fixture_ok

    print("all checks passed" if ok else "SOME CHECKS FAILED")
    return ok
