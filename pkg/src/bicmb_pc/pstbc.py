"""Perfect space-time block codes for 2, 3, 4 and 6 streams.

A codeword carries D input vectors x_1, ..., x_D (one D-vector of QAM
symbols each) on a D x D matrix

    Z = sum_v  diag(G x_v) E^(v-1)

where G is the unitary generator of the code and E is the twisted shift
matrix with ones on the superdiagonal and the unit g in the lower-left
corner.  E^D = g I, so the D layers occupy D disjoint twisted diagonals:
entry (u, c) of Z belongs to layer v = ((c - u) mod D) + 1 and equals
(G x_v)_u, times g when the diagonal wraps (c < u).

Generators: the Golden code for D = 2; for D = 3, 4, 6 the cyclotomic
constructions over Q(omega, 2cos(2pi/7)), Q(i, 2cos(2pi/15)) and
Q(omega, 2cos(2pi/28)), with a trace-orthonormal ideal basis reduced to
integer coefficient tables below.  Unitarity is asserted when the
parameters are built.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

SUPPORTED_DIMS = (2, 3, 4, 6)

_OMEGA = np.exp(2j * np.pi / 3)

# Corner unit of the shift matrix per dimension.
_G_UNIT = {2: 1j, 3: _OMEGA, 4: 1j, 6: -_OMEGA}

# Cyclotomic generator data.  For dimension D: theta_k = 2cos(2pi k/m) over
# the listed conjugates k, base unit u (i or omega), normalization c, and
# one column per basis element given as (a, b) pairs meaning (a + b u) per
# power of theta.  Column l of the generator is sigma_k(col_l)/sqrt(c).
_CYCLOTOMIC = {
    3: dict(
        m=7, ks=(1, 2, 3), c=7, unit="omega",
        cols=[
            [(1, 1), (1, 0), (0, 0)],
            [(-1, -2), (1, 1), (1, 1)],
            [(-1, -2), (0, 0), (0, 1)],
        ],
    ),
    4: dict(
        m=15, ks=(1, 2, 4, 7), c=15, unit="i",
        cols=[
            [(1, -3), (0, 0), (0, 1), (0, 0)],
            [(0, 0), (1, -3), (0, 0), (0, 1)],
            [(-1, 1), (-3, 0), (1, 0), (1, 0)],
            [(0, -1), (-3, 4), (0, 0), (1, -1)],
        ],
    ),
    6: dict(
        m=28, ks=(1, 3, 5, 9, 11, 13), c=14, unit="omega",
        cols=[
            [(0, 0), (1, 0), (0, 0), (0, 0), (0, 0), (0, 0)],
            [(-3, -1), (0, 0), (1, 0), (0, 0), (0, 0), (0, 0)],
            [(0, 0), (3, 0), (0, 0), (-1, 0), (0, 0), (0, 0)],
            [(-4, 1), (0, 0), (5, 0), (0, 0), (-1, 0), (0, 0)],
            [(-3, -1), (0, 0), (4, 0), (0, 0), (-1, 0), (0, 0)],
            [(0, 0), (5, 0), (0, 0), (-5, 0), (0, 0), (1, 0)],
        ],
    ),
}


@dataclass(frozen=True, eq=False)
class PerfectCodeParams:
    """Static description of one code dimension.

    generator: unitary D x D matrix G applied to each input vector.
    shift: the twisted shift matrix E.
    shift_powers: (E^0, ..., E^(D-1)) precomputed for encoding.
    """

    dim: int
    g: complex
    generator: np.ndarray
    shift: np.ndarray
    shift_powers: tuple = field(repr=False, default=())


@dataclass
class PstbcCodeword:
    z: np.ndarray
    inputs: np.ndarray


def _golden_generator() -> np.ndarray:
    rho = (1 + np.sqrt(5)) / 2
    rho_c = (1 - np.sqrt(5)) / 2
    a = 1 + 1j * (1 - rho)
    a_c = 1 + 1j * (1 - rho_c)
    return np.array([[a, a * rho], [a_c, a_c * rho_c]]) / np.sqrt(5)


def _cyclotomic_generator(dim: int) -> np.ndarray:
    data = _CYCLOTOMIC[dim]
    theta = 2 * np.cos(2 * np.pi * np.asarray(data["ks"]) / data["m"])
    unit = 1j if data["unit"] == "i" else _OMEGA
    gen = np.zeros((dim, dim), dtype=complex)
    for l, col in enumerate(data["cols"]):
        vals = np.zeros(dim, dtype=complex)
        for j, (a, b) in enumerate(col):
            if a or b:
                vals += (a + b * unit) * theta ** j
        gen[:, l] = vals
    return gen / np.sqrt(data["c"])


def _shift_matrix(dim: int, g: complex) -> np.ndarray:
    e = np.zeros((dim, dim), dtype=complex)
    for i in range(dim - 1):
        e[i, i + 1] = 1.0
    e[dim - 1, 0] = g
    return e


@lru_cache(maxsize=None)
def build_params(dim: int) -> PerfectCodeParams:
    """Build (and verify) the code parameters for one dimension."""
    if dim not in SUPPORTED_DIMS:
        raise ValueError(f"unsupported code dimension {dim}; pick from {SUPPORTED_DIMS}")
    g = _G_UNIT[dim]
    gen = _golden_generator() if dim == 2 else _cyclotomic_generator(dim)
    shift = _shift_matrix(dim, g)

    unit_err = np.abs(gen @ gen.conj().T - np.eye(dim)).max()
    if unit_err > 1e-12:
        raise AssertionError(f"generator for D={dim} is not unitary (err {unit_err:.2e})")
    shift_err = np.abs(np.linalg.matrix_power(shift, dim) - g * np.eye(dim)).max()
    if shift_err > 1e-12:
        raise AssertionError(f"shift matrix for D={dim} violates E^D = gI (err {shift_err:.2e})")

    powers = [np.eye(dim, dtype=complex)]
    for _ in range(dim - 1):
        powers.append(powers[-1] @ shift)
    for arr in (gen, shift, *powers):
        arr.setflags(write=False)
    return PerfectCodeParams(dim=dim, g=g, generator=gen, shift=shift,
                             shift_powers=tuple(powers))


def layer_of_entry(u: int, c: int, dim: int) -> tuple[int, complex | float]:
    """Layer index v (1-based) and wrap weight for codeword entry (u, c), 0-based u, c.

    Entry (u, c) of Z equals weight * (G x_v)_u with weight = g on wrapped
    diagonals (c < u) and 1 otherwise.
    """
    v = (c - u) % dim + 1
    weight = _G_UNIT[dim] if c < u else 1.0
    return v, weight


def encode(params: PerfectCodeParams, inputs: np.ndarray) -> PstbcCodeword:
    """Map D input vectors (rows of `inputs`) onto one codeword matrix.

    inputs[v - 1] is the D-vector x_v.
    """
    x = np.asarray(inputs, dtype=complex)
    d = params.dim
    if x.shape != (d, d):
        raise ValueError(f"inputs must be shaped ({d}, {d}); got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("inputs must be finite")
    z = np.zeros((d, d), dtype=complex)
    rotated = x @ params.generator.T          # row v-1 holds G x_v
    for v in range(d):
        z += rotated[v, :, None] * params.shift_powers[v]
    return PstbcCodeword(z=z, inputs=x.copy())


def encode_batch(params: PerfectCodeParams, inputs: np.ndarray) -> np.ndarray:
    """Codeword matrices for a stack of input blocks shaped (..., D, D)."""
    x = np.asarray(inputs, dtype=complex)
    d = params.dim
    if x.ndim < 2 or x.shape[-2:] != (d, d):
        raise ValueError(f"inputs must be shaped (..., {d}, {d}); got {x.shape}")
    rotated = x @ params.generator.T
    z = np.zeros_like(x)
    for v in range(d):
        z += rotated[..., v, :, None] * params.shift_powers[v]
    return z


def omega_matrix(params: PerfectCodeParams, v: int) -> np.ndarray:
    """Wrap-weight matrix Omega_v = diag(omega_{v,u}) for layer v (1-based).

    omega_{v,u} = 1 for u <= D - v + 1 and g for the wrapped tail.
    """
    d = params.dim
    if not 1 <= v <= d:
        raise ValueError(f"layer index must be in 1..{d}; got {v}")
    w = np.ones(d, dtype=complex)
    w[d - v + 1:] = params.g
    return np.diag(w)
