"""Two-polarization-mode bosonic Fock space.

States live on the triangular occupation lattice (n_H, n_V) with
n_H + n_V <= cutoff and are stored as dense complex amplitude vectors.
Creation/annihilation operators carry the exact bosonic sqrt factors,
and polarization rotations act through the induced transformation of
the mode creation operators.  All operations are pure functions
returning new states; states are safe to share across threads.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, Iterable, Sequence, Tuple

import numpy as np

NORM_TOL = 1e-12


class CapacityError(Exception):
    """An operation would push population past the state's cutoff."""


class UndefinedFidelityError(ValueError):
    """Fidelity requested against a zero-norm state."""


@lru_cache(maxsize=None)
def lattice_tables(cutoff: int):
    """Index tables for the triangular lattice at a given cutoff.

    Basis ordering groups occupation pairs by total photon number n,
    with n_H ascending inside each block: index = n(n+1)/2 + n_H.
    Returns (dim, nh, nv) where nh/nv are int arrays of length dim.
    """
    if cutoff < 0:
        raise ValueError(f"cutoff must be >= 0, got {cutoff}")
    dim = (cutoff + 1) * (cutoff + 2) // 2
    nh = np.zeros(dim, dtype=np.int64)
    nv = np.zeros(dim, dtype=np.int64)
    i = 0
    for n in range(cutoff + 1):
        for h in range(n + 1):
            nh[i] = h
            nv[i] = n - h
            i += 1
    nh.setflags(write=False)
    nv.setflags(write=False)
    return dim, nh, nv


def lattice_index(nh: int, nv: int) -> int:
    n = nh + nv
    return n * (n + 1) // 2 + nh


@dataclass(frozen=True)
class PolarizedFockState:
    """Dense two-mode photon-number state.

    amp[i] is the complex amplitude of |n_H, n_V> at lattice index i.
    ``normalized`` marks unit-norm states; conditional (post-measurement)
    states carry their branch weight as squared norm instead.
    ``pre_norm`` optionally records the norm a constructor divided out.
    """

    cutoff: int
    amp: np.ndarray
    normalized: bool = False
    pre_norm: float | None = field(default=None, compare=False)

    def __post_init__(self):
        dim, _, _ = lattice_tables(self.cutoff)
        if self.amp.shape != (dim,):
            raise ValueError(
                f"amplitude vector has shape {self.amp.shape}, expected ({dim},)"
            )
        self.amp.setflags(write=False)

    @property
    def squared_norm(self) -> float:
        return float(np.vdot(self.amp, self.amp).real)

    @property
    def norm(self) -> float:
        return math.sqrt(self.squared_norm)

    def amplitude(self, nh: int, nv: int) -> complex:
        if nh < 0 or nv < 0 or nh + nv > self.cutoff:
            return 0j
        return complex(self.amp[lattice_index(nh, nv)])

    def occupations(self) -> Iterable[Tuple[int, int, complex]]:
        """Yield (n_H, n_V, amplitude) for every nonzero entry."""
        _, nh, nv = lattice_tables(self.cutoff)
        for i in np.nonzero(self.amp)[0]:
            yield int(nh[i]), int(nv[i]), complex(self.amp[i])

    def total_photon_number(self) -> int | None:
        """The definite total photon number, or None for superpositions
        spanning more than one number shell."""
        _, nh, nv = lattice_tables(self.cutoff)
        idx = np.nonzero(self.amp)[0]
        if idx.size == 0:
            return None
        totals = np.unique(nh[idx] + nv[idx])
        return int(totals[0]) if totals.size == 1 else None


def _fresh(cutoff: int, amp: np.ndarray, normalized=False, pre_norm=None) -> PolarizedFockState:
    return PolarizedFockState(cutoff=cutoff, amp=amp, normalized=normalized, pre_norm=pre_norm)


@dataclass(frozen=True)
class PolarizationCoefficients:
    """Unit Jones pair (alpha, beta) giving a creation/annihilation axis
    alpha a_H + beta a_V.  Unnormalized pairs are rejected."""

    alpha: complex
    beta: complex

    def __post_init__(self):
        s = abs(self.alpha) ** 2 + abs(self.beta) ** 2
        if abs(s - 1.0) > NORM_TOL:
            raise ValueError(
                f"polarization coefficients must satisfy |alpha|^2+|beta|^2=1, got {s!r}"
            )

    @staticmethod
    def linear(angle: float) -> "PolarizationCoefficients":
        """Linear polarization at the given angle from H."""
        return PolarizationCoefficients(math.cos(angle), math.sin(angle))

    @staticmethod
    def of(pair: "PolarizationCoefficients | Tuple[complex, complex]") -> "PolarizationCoefficients":
        if isinstance(pair, PolarizationCoefficients):
            return pair
        a, b = pair
        return PolarizationCoefficients(complex(a), complex(b))


H_AXIS = PolarizationCoefficients(1.0, 0.0)
V_AXIS = PolarizationCoefficients(0.0, 1.0)


@dataclass(frozen=True)
class CreationSpec:
    """Ordered list of polarization axes; expanding applies one creation
    operator per factor to vacuum."""

    factors: Tuple[PolarizationCoefficients, ...]

    def __post_init__(self):
        if len(self.factors) < 1:
            raise ValueError("CreationSpec needs at least one factor")

    @staticmethod
    def of(factors: Sequence) -> "CreationSpec":
        return CreationSpec(tuple(PolarizationCoefficients.of(f) for f in factors))

    def __len__(self) -> int:
        return len(self.factors)


@dataclass(frozen=True)
class JonesUnitary:
    """2x2 unitary on the (H, V) polarization amplitudes."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.complex128)
        if m.shape != (2, 2):
            raise ValueError("Jones matrix must be 2x2")
        dev = np.abs(m @ m.conj().T - np.eye(2)).max()
        if dev > NORM_TOL:
            raise ValueError(f"Jones matrix is not unitary (deviation {dev:g})")
        object.__setattr__(self, "matrix", m)
        m.setflags(write=False)

    def compose(self, other: "JonesUnitary") -> "JonesUnitary":
        """self applied after other."""
        return JonesUnitary(self.matrix @ other.matrix)

    @staticmethod
    def identity() -> "JonesUnitary":
        return JonesUnitary(np.eye(2, dtype=np.complex128))

    @staticmethod
    def rotation(angle: float) -> "JonesUnitary":
        """Physical polarization rotation by ``angle``: H moves toward V."""
        c, s = math.cos(angle), math.sin(angle)
        return JonesUnitary(np.array([[c, -s], [s, c]], dtype=np.complex128))

    @staticmethod
    def poincare_45_rotation(angle: float) -> "JonesUnitary":
        """Rotation about the +-45 axis of the Poincare sphere; steps H
        through the elliptical family (cos t, i sin t)."""
        c, s = math.cos(angle), math.sin(angle)
        return JonesUnitary(np.array([[c, 1j * s], [1j * s, c]], dtype=np.complex128))

    @staticmethod
    def align_from_h(target: PolarizationCoefficients) -> "JonesUnitary":
        """The canonical SU(2) element sending the H axis onto ``target``."""
        a, b = complex(target.alpha), complex(target.beta)
        return JonesUnitary(
            np.array([[a, -b.conjugate()], [b, a.conjugate()]], dtype=np.complex128)
        )


def circular_basis() -> JonesUnitary:
    """Rotation placing the right/left circular components of a state in
    the (H, V) occupation slots, for number statistics in that basis."""
    s = 1.0 / math.sqrt(2.0)
    return JonesUnitary(np.array([[s, -1j * s], [s, 1j * s]], dtype=np.complex128))


# ---------------------------------------------------------------------------
# operations


def vacuum(cutoff: int) -> PolarizedFockState:
    """|0, 0> at the given cutoff."""
    if cutoff < 0:
        raise ValueError(f"cutoff must be >= 0, got {cutoff}")
    dim, _, _ = lattice_tables(cutoff)
    amp = np.zeros(dim, dtype=np.complex128)
    amp[0] = 1.0
    return _fresh(cutoff, amp, normalized=True)


def zero_state(cutoff: int) -> PolarizedFockState:
    dim, _, _ = lattice_tables(cutoff)
    return _fresh(cutoff, np.zeros(dim, dtype=np.complex128))


def grow_cutoff(s: PolarizedFockState, cutoff: int) -> PolarizedFockState:
    """Zero-pad a state onto a larger lattice (no-op if already there)."""
    if cutoff < s.cutoff:
        raise ValueError("grow_cutoff cannot shrink a state")
    if cutoff == s.cutoff:
        return s
    dim, nh, nv = lattice_tables(s.cutoff)
    big, _, _ = lattice_tables(cutoff)
    amp = np.zeros(big, dtype=np.complex128)
    amp[: dim] = s.amp  # shared ordering: low shells occupy the same prefix
    return _fresh(cutoff, amp, normalized=s.normalized, pre_norm=s.pre_norm)


@lru_cache(maxsize=None)
def _creation_maps(cutoff: int):
    """Scatter tables for one creation operator application.

    For each source index i with n_H+n_V < cutoff: target index after
    adding an H (resp. V) photon and the sqrt(n+1) bosonic weight.
    """
    dim, nh, nv = lattice_tables(cutoff)
    src = np.nonzero(nh + nv < cutoff)[0]
    to_h = np.array([lattice_index(nh[i] + 1, nv[i]) for i in src], dtype=np.int64)
    to_v = np.array([lattice_index(nh[i], nv[i] + 1) for i in src], dtype=np.int64)
    wt_h = np.sqrt(nh[src] + 1.0)
    wt_v = np.sqrt(nv[src] + 1.0)
    return src, to_h, wt_h, to_v, wt_v


def apply_creation(s: PolarizedFockState, axis) -> PolarizedFockState:
    """(alpha a+_H + beta a+_V) |s>, with exact sqrt(n+1) factors.

    Raises CapacityError if any populated shell sits at the cutoff;
    population is never silently truncated.
    """
    axis = PolarizationCoefficients.of(axis)
    dim, nh, nv = lattice_tables(s.cutoff)
    top = nh + nv == s.cutoff
    if np.any(s.amp[top] != 0):
        raise CapacityError(
            f"creation on a state populated at cutoff {s.cutoff}"
        )
    src, to_h, wt_h, to_v, wt_v = _creation_maps(s.cutoff)
    out = np.zeros(dim, dtype=np.complex128)
    vals = s.amp[src]
    out[to_h] += axis.alpha * wt_h * vals
    out[to_v] += axis.beta * wt_v * vals
    return _fresh(s.cutoff, out)


def apply_annihilation(s: PolarizedFockState, axis) -> PolarizedFockState:
    """(alpha* a_H + beta* a_V) |s>; vacuum maps to the zero vector."""
    axis = PolarizationCoefficients.of(axis)
    dim, nh, nv = lattice_tables(s.cutoff)
    src, to_h, wt_h, to_v, wt_v = _creation_maps(s.cutoff)
    out = np.zeros(dim, dtype=np.complex128)
    # a is the adjoint of a+ on the same lattice: gather instead of scatter.
    out[src] = (
        axis.alpha.conjugate() * wt_h * s.amp[to_h]
        + axis.beta.conjugate() * wt_v * s.amp[to_v]
    )
    return _fresh(s.cutoff, out)


@lru_cache(maxsize=None)
def _rotation_matrix_cached(cutoff: int, key: bytes) -> np.ndarray:
    u = np.frombuffer(key, dtype=np.complex128).reshape(2, 2)
    dim, nh, nv = lattice_tables(cutoff)
    col_h = PolarizationCoefficients(complex(u[0, 0]), complex(u[1, 0]))
    col_v = PolarizationCoefficients(complex(u[0, 1]), complex(u[1, 1]))
    mat = np.zeros((dim, dim), dtype=np.complex128)
    fact = [math.sqrt(math.factorial(k)) for k in range(cutoff + 1)]
    for j in range(dim):
        h, v = int(nh[j]), int(nv[j])
        st = vacuum(cutoff)
        for _ in range(h):
            st = apply_creation(st, col_h)
        for _ in range(v):
            st = apply_creation(st, col_v)
        mat[:, j] = st.amp / (fact[h] * fact[v])
    return mat


def rotation_fock_matrix(cutoff: int, u: JonesUnitary) -> np.ndarray:
    """Induced Fock-space matrix of a Jones unitary (block-diagonal in
    total photon number).  Cached; do not mutate the result."""
    return _rotation_matrix_cached(cutoff, u.matrix.tobytes())


def apply_rotation(s: PolarizedFockState, u: JonesUnitary) -> PolarizedFockState:
    """Induced action of the mode transformation a+_H -> u00 a+_H + u10 a+_V,
    a+_V -> u01 a+_H + u11 a+_V.  Norm preserving."""
    if not isinstance(u, JonesUnitary):
        u = JonesUnitary(np.asarray(u))
    mat = rotation_fock_matrix(s.cutoff, u)
    return _fresh(s.cutoff, mat @ s.amp, normalized=s.normalized, pre_norm=s.pre_norm)


def overlap(a: PolarizedFockState, b: PolarizedFockState) -> complex:
    """<a|b>, zero-padding the smaller cutoff."""
    if a.cutoff != b.cutoff:
        c = max(a.cutoff, b.cutoff)
        a, b = grow_cutoff(a, c), grow_cutoff(b, c)
    return complex(np.vdot(a.amp, b.amp))


def fidelity(a: PolarizedFockState, b: PolarizedFockState) -> float:
    """|<a|b>|^2 / (|a|^2 |b|^2)."""
    na, nb = a.squared_norm, b.squared_norm
    if na <= 0.0 or nb <= 0.0:
        raise UndefinedFidelityError("fidelity against a zero-norm state")
    return abs(overlap(a, b)) ** 2 / (na * nb)


def normalize(s: PolarizedFockState) -> PolarizedFockState:
    n = s.norm
    if n == 0.0:
        raise ValueError("cannot normalize the zero vector")
    return _fresh(s.cutoff, s.amp / n, normalized=True, pre_norm=n)


def build_product_state(spec: CreationSpec, cutoff: int) -> PolarizedFockState:
    """Expand an ordered product of creation axes on vacuum, normalized.

    The pre-normalization norm is kept on the result for diagnostics.
    """
    if len(spec) > cutoff:
        raise CapacityError(
            f"{len(spec)} creation factors cannot fit under cutoff {cutoff}"
        )
    s = vacuum(cutoff)
    for f in spec.factors:
        s = apply_creation(s, f)
    return normalize(s)


def noon_spec(n: int, variant: str = "linear-hv") -> CreationSpec:
    """Creation factors whose product is the N-photon two-branch
    superposition state.

    linear-hv: linear factors at angles k*pi/N; diagonal-45: the
    elliptical family (cos, i sin) tracing the same distribution in the
    orthogonal plane of the Poincare sphere.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    v = variant.lower()
    if v == "linear-hv":
        fac = [PolarizationCoefficients.linear(k * math.pi / n) for k in range(n)]
    elif v == "diagonal-45":
        fac = [
            PolarizationCoefficients(
                math.cos(k * math.pi / n), 1j * math.sin(k * math.pi / n)
            )
            for k in range(n)
        ]
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return CreationSpec(tuple(fac))


def noon_state(n: int, cutoff: int | None = None, variant: str = "linear-hv") -> PolarizedFockState:
    return build_product_state(noon_spec(n, variant), cutoff if cutoff is not None else n)


def plus_power_factors(k: int) -> Tuple[PolarizationCoefficients, ...]:
    """Axes whose commuting product expands to (a+_H)^k + (a+_V)^k.

    Uses k-th roots of unity: prod(x + c w^j y) = x^k + (-1)^(k-1) c^k y^k,
    with c phased so the closing sign is +.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    s = 1.0 / math.sqrt(2.0)
    c = cmath.exp(1j * math.pi * (k - 1) / k)
    return tuple(
        PolarizationCoefficients(s, s * c * cmath.exp(2j * math.pi * j / k))
        for j in range(k)
    )


def mm_factors(m: int, mp: int) -> CreationSpec:
    """Creation factors realizing the balanced |m, m'> + |m', m> target:
    m' photons in each of H and V, then the (H^k + V^k) block, k = m - m'."""
    if mp < 0 or m <= mp:
        raise ValueError(f"need m > m' >= 0, got m={m}, m'={mp}")
    fac = [H_AXIS] * mp + [V_AXIS] * mp + list(plus_power_factors(m - mp))
    return CreationSpec(tuple(fac))


def mm_target(m: int, mp: int, cutoff: int) -> PolarizedFockState:
    """Normalized ((a+_H)^(m-m') + (a+_V)^(m-m')) (a+_H a+_V)^m' |0>."""
    if mp < 0 or m <= mp:
        raise ValueError(f"need m > m' >= 0, got m={m}, m'={mp}")
    if m + mp > cutoff:
        raise CapacityError(f"m+m'={m + mp} exceeds cutoff {cutoff}")
    base = vacuum(cutoff)
    for _ in range(mp):
        base = apply_creation(base, H_AXIS)
    for _ in range(mp):
        base = apply_creation(base, V_AXIS)
    lo = hi = base
    for _ in range(m - mp):
        lo = apply_creation(lo, H_AXIS)
        hi = apply_creation(hi, V_AXIS)
    return normalize(_fresh(cutoff, lo.amp + hi.amp))


def number_distribution(s: PolarizedFockState, basis: JonesUnitary) -> Dict[Tuple[int, int], float]:
    """Occupation-pair probabilities of a normalized state in a rotated
    mode basis.  Sums to 1."""
    if abs(s.squared_norm - 1.0) > 1e-10:
        raise ValueError("number_distribution expects a normalized state")
    r = apply_rotation(s, basis)
    _, nh, nv = lattice_tables(s.cutoff)
    p = np.abs(r.amp) ** 2
    return {(int(nh[i]), int(nv[i])): float(p[i]) for i in range(len(p))}
