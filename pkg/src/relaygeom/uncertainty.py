"""Source uncertainty sets and inverter auxiliary signals.

Noise lives in a complex coordinate per modelled degree of freedom (one per
source for balanced noise) and is mapped into the stacked source vector by a
complex matrix ``sigma`` that absorbs both the per-source scale and the
balanced three-phase expansion.  Noise sets are either zonotopes (kept with
their half-space rows ``P lam <= 1`` over realified coordinates) or unit
norm balls.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from . import geom
from .netmodel import A_MATRIX, SourceKind, ThreePhaseNetwork, phase_array


def realify(vec: np.ndarray) -> np.ndarray:
    """Complex vector to [Re; Im] coordinates."""
    vec = np.asarray(vec, dtype=complex).reshape(-1)
    return np.concatenate([vec.real, vec.imag])


def unrealify(vec: np.ndarray) -> np.ndarray:
    vec = np.asarray(vec, dtype=float).reshape(-1)
    d = vec.size // 2
    return vec[:d] + 1j * vec[d:]


class NoiseKind(Enum):
    ZONOTOPE = "zonotope"
    BALL = "ball"


@dataclass(frozen=True)
class NoiseSet:
    """Noise region in C^dim, symmetric about its center (usually 0)."""

    kind: NoiseKind
    dim: int
    center: np.ndarray  # complex (dim,)
    generators: np.ndarray  # complex (p, dim); empty for balls
    h_rows: np.ndarray  # real (rows, 2*dim) with P lam_realified <= 1
    radius: float = 1.0

    @property
    def is_zonotope(self) -> bool:
        return self.kind is NoiseKind.ZONOTOPE

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        """Random members, one complex row vector per sample."""
        if self.is_zonotope:
            beta = rng.uniform(-1.0, 1.0, size=(count, self.generators.shape[0]))
            return self.center + beta @ self.generators
        raw = rng.normal(size=(count, 2 * self.dim))
        raw /= np.maximum(np.linalg.norm(raw, axis=1, keepdims=True), 1e-300)
        r = self.radius * rng.uniform(0.0, 1.0, size=(count, 1)) ** (1.0 / (2 * self.dim))
        pts = raw * r
        return pts[:, : self.dim] + 1j * pts[:, self.dim:]

    def contains(self, lam: np.ndarray, tol: float = 1e-9) -> bool:
        lam = np.asarray(lam, dtype=complex).reshape(self.dim)
        if self.is_zonotope:
            return bool(np.all(self.h_rows @ realify(lam - self.center) <= 1.0 + tol))
        return bool(np.linalg.norm(lam - self.center) <= self.radius + tol)


def product_polygon_noise(n_sources: int, n_sides: int = 20) -> NoiseSet:
    """Cartesian product of identical regular noise polygons, one per source."""
    zono, h = geom.regular_polygon_noise(n_sides)
    gens_c = zono.generators[:, 0] + 1j * zono.generators[:, 1]
    p = gens_c.shape[0]
    generators = np.zeros((p * n_sources, n_sources), dtype=complex)
    h_rows = np.zeros((h.shape[0] * n_sources, 2 * n_sources))
    for k in range(n_sources):
        generators[k * p: (k + 1) * p, k] = gens_c
        rows = slice(k * h.shape[0], (k + 1) * h.shape[0])
        h_rows[rows, k] = h[:, 0]
        h_rows[rows, n_sources + k] = h[:, 1]
    return NoiseSet(kind=NoiseKind.ZONOTOPE, dim=n_sources,
                    center=np.zeros(n_sources, dtype=complex),
                    generators=generators, h_rows=h_rows)


def norm_ball_noise(dim: int, radius: float = 1.0) -> NoiseSet:
    return NoiseSet(kind=NoiseKind.BALL, dim=dim,
                    center=np.zeros(dim, dtype=complex),
                    generators=np.zeros((0, dim), dtype=complex),
                    h_rows=np.zeros((0, 2 * dim)), radius=radius)


def point_noise(dim: int) -> NoiseSet:
    """Degenerate zero-noise set (useful for tests)."""
    return NoiseSet(kind=NoiseKind.ZONOTOPE, dim=dim,
                    center=np.zeros(dim, dtype=complex),
                    generators=np.zeros((0, dim), dtype=complex),
                    h_rows=np.zeros((0, 2 * dim)))


# ---------------------------------------------------------------------------
# Source uncertainty
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SourceUncertainty:
    """Nominal sources plus scaled noise: u = [i_C; v_S] + sigma lam."""

    i0_c: np.ndarray  # complex, 3 * n_ibr
    v0_s: np.ndarray  # complex, 3 * n_sg
    sigma: np.ndarray  # complex, (3 * n_src, noise.dim)
    noise: NoiseSet

    def __post_init__(self):
        i0 = np.asarray(self.i0_c, dtype=complex).reshape(-1)
        v0 = np.asarray(self.v0_s, dtype=complex).reshape(-1)
        sig = np.asarray(self.sigma, dtype=complex)
        if sig.shape != (i0.size + v0.size, self.noise.dim):
            raise ValueError(
                f"sigma shape {sig.shape} does not map noise dim "
                f"{self.noise.dim} to source dim {i0.size + v0.size}")
        object.__setattr__(self, "i0_c", i0)
        object.__setattr__(self, "v0_s", v0)
        object.__setattr__(self, "sigma", sig)

    @property
    def n_ibr(self) -> int:
        return self.i0_c.size // 3

    def nominal(self) -> np.ndarray:
        return np.concatenate([self.i0_c, self.v0_s])

    def realized(self, lam: np.ndarray) -> np.ndarray:
        return self.nominal() + self.sigma @ np.asarray(lam, dtype=complex).reshape(-1)

    def sample_sources(self, rng: np.random.Generator, count: int) -> np.ndarray:
        lams = self.noise.sample(rng, count)
        return self.nominal()[None, :] + lams @ self.sigma.T

    def with_signal(self, signal: "AuxSignal | None") -> "SourceUncertainty":
        """Shift the nominal IBR currents by an auxiliary signal."""
        if signal is None:
            return self
        return replace(self, i0_c=signal.apply(self.i0_c))


def balanced_uncertainty(net: ThreePhaseNetwork, scale, n_sides: int = 20,
                         ball: bool = False) -> SourceUncertainty:
    """Per-source balanced noise ``lam_k [1, alpha, alpha^2]`` scaled by sigma.

    ``scale`` is a scalar or one value per source (IBRs first, then SGs).
    """
    ibr = net.buses_of(SourceKind.IBR)
    sg = net.buses_of(SourceKind.SG)
    n_src = len(ibr) + len(sg)
    scales = np.broadcast_to(np.asarray(scale, dtype=float), (n_src,))
    column = A_MATRIX[:, 2].copy()  # [1, alpha, alpha^2]
    sigma = np.zeros((3 * n_src, n_src), dtype=complex)
    for k in range(n_src):
        sigma[3 * k: 3 * k + 3, k] = scales[k] * column
    noise = norm_ball_noise(n_src) if ball else product_polygon_noise(n_src, n_sides)
    i0 = np.concatenate([phase_array(b.phasor) for b in ibr]) if ibr else np.zeros(0, complex)
    v0 = np.concatenate([phase_array(b.phasor) for b in sg]) if sg else np.zeros(0, complex)
    return SourceUncertainty(i0_c=i0, v0_s=v0, sigma=sigma, noise=noise)


# ---------------------------------------------------------------------------
# Auxiliary signals
# ---------------------------------------------------------------------------


class InjectionKind(Enum):
    NEGATIVE_SEQUENCE = "negative_sequence"
    ZERO_SEQUENCE = "zero_sequence"
    POSITIVE_SEQUENCE = "positive_sequence"
    PER_PHASE = "per_phase"


_SEQ_COLUMN = {
    InjectionKind.NEGATIVE_SEQUENCE: A_MATRIX[:, 2],
    InjectionKind.ZERO_SEQUENCE: A_MATRIX[:, 0],
    InjectionKind.POSITIVE_SEQUENCE: A_MATRIX[:, 1],
}


@dataclass(frozen=True)
class AuxSignal:
    """Perturbation of the IBR currents, affine in the signal vector delta."""

    delta: np.ndarray  # complex, n_ibr (or 3*n_ibr for per-phase)
    kind: InjectionKind = InjectionKind.NEGATIVE_SEQUENCE

    def __post_init__(self):
        object.__setattr__(self, "delta",
                           np.asarray(self.delta, dtype=complex).reshape(-1))

    @property
    def n_ibr(self) -> int:
        if self.kind is InjectionKind.PER_PHASE:
            return self.delta.size // 3
        return self.delta.size

    def norm(self) -> float:
        return float(np.linalg.norm(self.delta))

    def injection_map(self) -> np.ndarray:
        """T with i_C(delta) = i_C + T delta."""
        return injection_map(self.kind, self.n_ibr)

    def apply(self, i0_c: np.ndarray) -> np.ndarray:
        return np.asarray(i0_c, dtype=complex).reshape(-1) + self.injection_map() @ self.delta

    @classmethod
    def zero(cls, n_ibr: int,
             kind: InjectionKind = InjectionKind.NEGATIVE_SEQUENCE) -> "AuxSignal":
        width = 3 * n_ibr if kind is InjectionKind.PER_PHASE else n_ibr
        return cls(np.zeros(width, dtype=complex), kind)

    @classmethod
    def uniform(cls, phasor: complex, n_ibr: int,
                kind: InjectionKind = InjectionKind.NEGATIVE_SEQUENCE) -> "AuxSignal":
        """Every IBR injects the same phasor (grid-scan signal shape)."""
        if kind is InjectionKind.PER_PHASE:
            raise ValueError("uniform signal needs a sequence injection kind")
        return cls(np.full(n_ibr, phasor, dtype=complex), kind)


def injection_map(kind: InjectionKind, n_ibr: int) -> np.ndarray:
    if kind is InjectionKind.PER_PHASE:
        return np.eye(3 * n_ibr, dtype=complex)
    col = _SEQ_COLUMN[kind]
    t = np.zeros((3 * n_ibr, n_ibr), dtype=complex)
    for k in range(n_ibr):
        t[3 * k: 3 * k + 3, k] = col
    return t
