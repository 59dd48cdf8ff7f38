"""Numeric reference of the multimodal conditional adapter (MCA).

The adapter fuses pooled MLLM vision/answer token features through two MLPs
and a zero-initialized projection, then adds the result to the text-feature
branch, itself wrapped by a second zero-initialized projection:

    fused = Z_m(M_i(vision) + M_a(answer)) + (text + Z_t(text))

Because both Z layers start at exactly zero, a freshly initialized adapter is
bitwise the identity on the text features; training can therefore depart from
the original conditioning path smoothly. Everything here is float64 numpy
with analytic gradients checked against central finite differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erf

_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def gelu(x: np.ndarray) -> np.ndarray:
    """Exact erf-form GELU."""
    return 0.5 * x * (1.0 + erf(x * _INV_SQRT2))


def gelu_grad(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + erf(x * _INV_SQRT2)) + x * np.exp(-0.5 * x * x) * _INV_SQRT_2PI


@dataclass
class FeatureMatrix:
    """(tokens, dim) float64 feature block."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError(f"expected (tokens, dim), got shape {self.values.shape}")
        if self.values.shape[0] == 0 or self.values.shape[1] == 0:
            raise ValueError(f"empty feature matrix {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("feature matrix contains non-finite values")

    @property
    def tokens(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]


@dataclass
class Mlp:
    """Token-wise two-layer map: linear, GELU, linear."""

    w1: np.ndarray  # (d_in, hidden)
    b1: np.ndarray  # (hidden,)
    w2: np.ndarray  # (hidden, d_out)
    b2: np.ndarray  # (d_out,)


@dataclass
class LinearMap:
    """Token-wise linear map (the 1x1-convolution equivalent)."""

    w: np.ndarray  # (d, d)
    b: np.ndarray  # (d,)


@dataclass
class AdapterParams:
    m_i: Mlp
    m_a: Mlp
    z_m: LinearMap
    z_t: LinearMap


def init_params(rng: np.random.Generator, d_mllm: int, d_text: int,
                hidden: int | None = None, scale: float = 0.2) -> AdapterParams:
    """Random MLPs, zero projections: the fresh-training starting point."""
    h = hidden if hidden is not None else d_text

    def mlp() -> Mlp:
        return Mlp(
            w1=rng.normal(0.0, scale, (d_mllm, h)),
            b1=rng.normal(0.0, scale, h),
            w2=rng.normal(0.0, scale, (h, d_text)),
            b2=rng.normal(0.0, scale, d_text),
        )

    zero = lambda: LinearMap(w=np.zeros((d_text, d_text)), b=np.zeros(d_text))
    return AdapterParams(m_i=mlp(), m_a=mlp(), z_m=zero(), z_t=zero())


def pool_tokens(x: np.ndarray, out_tokens: int) -> np.ndarray:
    """Adaptive mean pooling over the token axis (contiguous buckets)."""
    n = x.shape[0]
    out = np.empty((out_tokens, x.shape[1]), dtype=np.float64)
    for b in range(out_tokens):
        lo = (b * n) // out_tokens
        hi = max(lo + 1, math.ceil((b + 1) * n / out_tokens))
        out[b] = x[lo:hi].mean(axis=0)
    return out


def _pool_bounds(n: int, out_tokens: int) -> list[tuple[int, int]]:
    bounds = []
    for b in range(out_tokens):
        lo = (b * n) // out_tokens
        hi = max(lo + 1, math.ceil((b + 1) * n / out_tokens))
        bounds.append((lo, hi))
    return bounds


def mca_forward(f_i: FeatureMatrix, f_a: FeatureMatrix, f_t: FeatureMatrix,
                p: AdapterParams) -> FeatureMatrix:
    """Fused conditioning features; identical to f_t while Z layers are zero."""
    if f_i.dim != f_a.dim:
        raise ValueError(f"vision dim {f_i.dim} != answer dim {f_a.dim}")
    if f_i.dim != p.m_i.w1.shape[0]:
        raise ValueError(f"MLLM dim {f_i.dim} does not match MLP input "
                         f"{p.m_i.w1.shape[0]}")
    if f_t.dim != p.z_t.w.shape[0]:
        raise ValueError(f"text dim {f_t.dim} does not match projection "
                         f"{p.z_t.w.shape[0]}")
    out, _ = _forward_trace(f_i.values, f_a.values, f_t.values, p)
    return FeatureMatrix(values=out)


def _forward_trace(vi: np.ndarray, va: np.ndarray, vt: np.ndarray,
                   p: AdapterParams) -> tuple[np.ndarray, dict]:
    tokens = vt.shape[0]
    pi = pool_tokens(vi, tokens)
    pa = pool_tokens(va, tokens)
    hi = pi @ p.m_i.w1 + p.m_i.b1
    ha = pa @ p.m_a.w1 + p.m_a.b1
    ai = gelu(hi)
    aa = gelu(ha)
    mi = ai @ p.m_i.w2 + p.m_i.b2
    ma = aa @ p.m_a.w2 + p.m_a.b2
    s = mi + ma
    zm = s @ p.z_m.w + p.z_m.b
    zt = vt @ p.z_t.w + p.z_t.b
    out = zm + (vt + zt)
    trace = {"pi": pi, "pa": pa, "hi": hi, "ha": ha, "ai": ai, "aa": aa, "s": s}
    return out, trace


@dataclass
class AdapterGrads:
    params: AdapterParams  # same shapes, holding d(loss)/d(param)
    f_i: np.ndarray
    f_a: np.ndarray
    f_t: np.ndarray


def _unpool_grad(grad_pooled: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros((n, grad_pooled.shape[1]), dtype=np.float64)
    for b, (lo, hi) in enumerate(_pool_bounds(n, grad_pooled.shape[0])):
        out[lo:hi] += grad_pooled[b] / (hi - lo)
    return out


def mca_backward(f_i: FeatureMatrix, f_a: FeatureMatrix, f_t: FeatureMatrix,
                 p: AdapterParams, upstream: np.ndarray) -> AdapterGrads:
    """Analytic gradients of sum(upstream * forward) for params and inputs."""
    vi, va, vt = f_i.values, f_a.values, f_t.values
    g = np.asarray(upstream, dtype=np.float64)
    if g.shape != (f_t.tokens, p.z_m.w.shape[1]):
        raise ValueError(f"upstream shape {g.shape} does not match output "
                         f"({f_t.tokens}, {p.z_m.w.shape[1]})")
    _, tr = _forward_trace(vi, va, vt, p)

    # f_c = (s @ Wzm + bzm) + vt + (vt @ Wzt + bzt)
    d_zm = LinearMap(w=tr["s"].T @ g, b=g.sum(axis=0))
    d_s = g @ p.z_m.w.T
    d_zt = LinearMap(w=vt.T @ g, b=g.sum(axis=0))
    d_vt = g + g @ p.z_t.w.T

    def branch(mlp: Mlp, pooled, h, act, d_out):
        d_w2 = act.T @ d_out
        d_b2 = d_out.sum(axis=0)
        d_act = d_out @ mlp.w2.T
        d_h = d_act * gelu_grad(h)
        d_w1 = pooled.T @ d_h
        d_b1 = d_h.sum(axis=0)
        d_pooled = d_h @ mlp.w1.T
        return Mlp(w1=d_w1, b1=d_b1, w2=d_w2, b2=d_b2), d_pooled

    d_mi, d_pi = branch(p.m_i, tr["pi"], tr["hi"], tr["ai"], d_s)
    d_ma, d_pa = branch(p.m_a, tr["pa"], tr["ha"], tr["aa"], d_s)

    return AdapterGrads(
        params=AdapterParams(m_i=d_mi, m_a=d_ma, z_m=d_zm, z_t=d_zt),
        f_i=_unpool_grad(d_pi, vi.shape[0]),
        f_a=_unpool_grad(d_pa, va.shape[0]),
        f_t=d_vt,
    )


def param_arrays(p: AdapterParams) -> list[tuple[str, np.ndarray]]:
    """Flat named view of every parameter array, for finite-difference sweeps."""
    return [
        ("m_i.w1", p.m_i.w1), ("m_i.b1", p.m_i.b1),
        ("m_i.w2", p.m_i.w2), ("m_i.b2", p.m_i.b2),
        ("m_a.w1", p.m_a.w1), ("m_a.b1", p.m_a.b1),
        ("m_a.w2", p.m_a.w2), ("m_a.b2", p.m_a.b2),
        ("z_m.w", p.z_m.w), ("z_m.b", p.z_m.b),
        ("z_t.w", p.z_t.w), ("z_t.b", p.z_t.b),
    ]
