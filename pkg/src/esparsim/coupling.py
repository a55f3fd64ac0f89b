"""Impedance-domain physics of transmit antenna arrays.

Port currents from feed voltages (generalized Ohm's law), the single-feed
parasitic-array variant, the feed-port input impedance (Schur complement of
the parasitic block), return loss of a source/antenna match, and an analytic
induced-EMF mutual-impedance model for parallel half-wave dipoles that serves
as the default coupling matrix when no measured one is supplied.

All impedances are in Ohms. Element 0 of an array is the active (fed)
element by convention; elements 1..n_t-1 are parasitic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.constants
from scipy.special import sici

from .errors import DegenerateMatch, SingularNetwork

# Free-space wave impedance (Ohm); prefactor of the induced-EMF integrals.
ETA_0 = scipy.constants.mu_0 * scipy.constants.c

#: Self impedance of a resonant half-wave dipole (standard antenna-theory value).
DEFAULT_SELF_IMPEDANCE = 73.0 + 42.5j

#: Relative condition-number cap above which a network is treated as singular.
DEFAULT_COND_CAP = 1e12

#: Clamp for a perfect match, where the reflection coefficient underflows.
RETURN_LOSS_FLOOR_DB = -300.0


@dataclass(frozen=True)
class CouplingMatrix:
    """Mutual-impedance matrix of a transmit array.

    Square complex matrix ``z`` with ``z[i, j]`` the mutual impedance between
    elements i and j. Must be symmetric (reciprocity of a passive structure)
    and have strictly positive resistance on the diagonal.
    """

    z: np.ndarray

    def __post_init__(self):
        z = np.array(self.z, dtype=complex)
        if z.ndim != 2 or z.shape[0] != z.shape[1]:
            raise ValueError("coupling matrix must be square")
        if z.shape[0] < 1:
            raise ValueError("coupling matrix must have at least one element")
        scale = max(1.0, float(np.abs(z).max()))
        if not np.allclose(z, z.T, rtol=1e-12, atol=1e-12 * scale):
            raise ValueError("coupling matrix must be symmetric (reciprocity)")
        if np.any(z.real.diagonal() <= 0.0):
            raise ValueError("diagonal entries must have positive real part")
        z.setflags(write=False)
        object.__setattr__(self, "z", z)

    @property
    def n_t(self) -> int:
        return self.z.shape[0]


@dataclass(frozen=True)
class LoadConfig:
    """Diagonal loading of a single-feed parasitic array.

    ``z_s`` is the tunable source/matching impedance at the active port and
    ``parasitic_loads`` the analog loads at the n_t-1 parasitic ports.
    """

    z_s: complex
    parasitic_loads: np.ndarray

    def __post_init__(self):
        loads = np.atleast_1d(np.asarray(self.parasitic_loads, dtype=complex))
        loads.setflags(write=False)
        object.__setattr__(self, "z_s", complex(self.z_s))
        object.__setattr__(self, "parasitic_loads", loads)

    @property
    def n_t(self) -> int:
        return 1 + self.parasitic_loads.shape[0]

    def diagonal(self) -> np.ndarray:
        """Diagonal entries [z_s, x_1, ..., x_{n_t-1}] of the load matrix."""
        return np.concatenate(([self.z_s], self.parasitic_loads))

    def within_box(self, box: "ConstraintBox") -> bool:
        return all(box.contains(z) for z in self.diagonal())


@dataclass(frozen=True)
class ConstraintBox:
    """Hardware limits on realizable loads and the return-loss budget.

    Real and imaginary parts of every load (source impedance included) must
    lie in ``[re_min, re_max] x [im_min, im_max]`` and the feed return loss
    must not exceed ``return_loss_max`` (dB; more negative is better).
    """

    re_min: float = -500.0
    re_max: float = 500.0
    im_min: float = -500.0
    im_max: float = 500.0
    return_loss_max: float = -10.0

    def __post_init__(self):
        if self.re_min > self.re_max:
            raise ValueError("re_min must not exceed re_max")
        if self.im_min > self.im_max:
            raise ValueError("im_min must not exceed im_max")

    def contains(self, z: complex, tol: float = 0.0) -> bool:
        return (
            self.re_min - tol <= z.real <= self.re_max + tol
            and self.im_min - tol <= z.imag <= self.im_max + tol
        )

    def clip(self, z: complex) -> complex:
        return complex(
            min(max(z.real, self.re_min), self.re_max),
            min(max(z.imag, self.im_min), self.im_max),
        )


@dataclass(frozen=True)
class SourceConfig:
    """Per-port feeding of an ideal (uncoupled) array: common self impedance
    ``z_c`` and source output resistance ``r_0``."""

    z_c: complex = 50.0 + 0.0j
    r_0: float = 50.0

    def __post_init__(self):
        if complex(self.z_c).real <= 0.0:
            raise ValueError("Re(z_c) must be positive")
        if self.r_0 <= 0.0:
            raise ValueError("r_0 must be positive")

    def feed_voltages(self, target_currents: np.ndarray) -> np.ndarray:
        """Voltages that drive the given port currents on an ideal array."""
        return (complex(self.z_c) + self.r_0) * np.asarray(target_currents, dtype=complex)


def _as_diagonal_entries(z_g: np.ndarray) -> np.ndarray:
    z_g = np.asarray(z_g, dtype=complex)
    if z_g.ndim == 1:
        return z_g
    if z_g.ndim == 2 and z_g.shape[0] == z_g.shape[1]:
        off = z_g - np.diag(np.diag(z_g))
        if np.abs(off).max(initial=0.0) > 0.0:
            raise ValueError("z_g must be diagonal")
        return np.diag(z_g).copy()
    raise ValueError("z_g must be a vector of diagonal entries or a diagonal matrix")


def _checked_network(a: np.ndarray, cond_cap: float) -> np.ndarray:
    if not np.all(np.isfinite(a)):
        raise SingularNetwork("network matrix contains non-finite entries")
    cond = np.linalg.cond(a)
    if not np.isfinite(cond) or cond > cond_cap:
        raise SingularNetwork(f"network is numerically singular (cond={cond:.3e})")
    return a


def port_currents_general(
    z_t: CouplingMatrix,
    z_g: np.ndarray,
    v: np.ndarray,
    cond_cap: float = DEFAULT_COND_CAP,
) -> np.ndarray:
    """Port currents of an arbitrarily fed array: ``(Z_T + Z_G)^-1 v``.

    Parameters
    ----------
    z_t : CouplingMatrix
    z_g : array
        Source output impedances, as a vector of diagonal entries or a
        diagonal matrix.
    v : array
        Feeding voltage per port.
    """
    diag = _as_diagonal_entries(z_g)
    if diag.shape[0] != z_t.n_t:
        raise ValueError("z_g size does not match the array")
    v = np.asarray(v, dtype=complex)
    if v.shape != (z_t.n_t,):
        raise ValueError("v must be a vector with one entry per port")
    a = _checked_network(z_t.z + np.diag(diag), cond_cap)
    return np.linalg.solve(a, v)


def port_currents_espar(
    z_t: CouplingMatrix,
    loads: LoadConfig,
    v_s: complex,
    cond_cap: float = DEFAULT_COND_CAP,
) -> np.ndarray:
    """Port currents of a single-feed parasitic array.

    Only port 0 is fed (voltage ``v_s``); the parasitic ports are closed on
    the analog loads. Equals ``v_s`` times the first column of
    ``(Z_T + diag([z_s, x_1, ...]))^-1``.
    """
    if loads.n_t != z_t.n_t:
        raise ValueError("load count does not match the array")
    a = _checked_network(z_t.z + np.diag(loads.diagonal()), cond_cap)
    rhs = np.zeros(z_t.n_t, dtype=complex)
    rhs[0] = v_s
    return np.linalg.solve(a, rhs)


def input_impedance(
    z_t: CouplingMatrix,
    parasitic_loads: np.ndarray,
    cond_cap: float = DEFAULT_COND_CAP,
) -> complex:
    """Impedance seen at the feed port given the parasitic loads.

    Schur complement of the loaded parasitic block:
    ``z[0,0] - z[0,1:] (z[1:,1:] + diag(x))^-1 z[1:,0]``.
    """
    loads = np.atleast_1d(np.asarray(parasitic_loads, dtype=complex))
    if loads.shape[0] != z_t.n_t - 1:
        raise ValueError("expected one load per parasitic element")
    if z_t.n_t == 1:
        return complex(z_t.z[0, 0])
    block = _checked_network(z_t.z[1:, 1:] + np.diag(loads), cond_cap)
    return complex(z_t.z[0, 0] - z_t.z[0, 1:] @ np.linalg.solve(block, z_t.z[1:, 0]))


def return_loss_db(
    z_in: complex,
    z_s: complex,
    floor_db: float = RETURN_LOSS_FLOOR_DB,
) -> float:
    """Return loss 10*log10(|rho|^2) of the feed match, in dB.

    ``rho = (z_in - conj(z_s)) / (z_in + z_s)``. A (near-)perfect conjugate
    match is reported as the clamp ``floor_db`` instead of -inf so the value
    stays finite in logs and CSV output.
    """
    z_in = complex(z_in)
    z_s = complex(z_s)
    denom = z_in + z_s
    if abs(denom) <= 1e-12 * (abs(z_in) + abs(z_s) + 1.0):
        raise DegenerateMatch("z_in + z_s is (numerically) zero")
    rho = (z_in - z_s.conjugate()) / denom
    if rho == 0.0:
        return floor_db
    return max(20.0 * np.log10(abs(rho)), floor_db)


def mutual_impedance_parallel_dipoles(spacing_wavelengths: float) -> complex:
    """Mutual impedance of two side-by-side parallel half-wave dipoles.

    Induced-EMF closed form in terms of sine/cosine integrals; spacing is in
    wavelengths. Magnitude decays roughly like 19/spacing for wide spacing.
    """
    d = float(spacing_wavelengths)
    if d <= 0.0:
        raise ValueError("spacing must be positive")
    u0 = 2.0 * np.pi * d
    s = np.sqrt(4.0 * d * d + 1.0)
    u1 = np.pi * (s + 1.0)
    u2 = np.pi * (s - 1.0)
    si0, ci0 = sici(u0)
    si1, ci1 = sici(u1)
    si2, ci2 = sici(u2)
    k = ETA_0 / (4.0 * np.pi)
    r = k * (2.0 * ci0 - ci1 - ci2)
    x = -k * (2.0 * si0 - si1 - si2)
    return complex(r, x)


def analytic_dipole_coupling(
    n_t: int,
    spacing_wavelengths: float,
    self_impedance: complex = DEFAULT_SELF_IMPEDANCE,
) -> CouplingMatrix:
    """Coupling matrix of a uniform linear array of parallel half-wave dipoles.

    Stand-in for a measured/extracted matrix: mutual terms follow the
    induced-EMF model at multiples of the element spacing, self terms are the
    configurable ``self_impedance``.
    """
    if n_t < 1:
        raise ValueError("n_t must be at least 1")
    z = np.empty((n_t, n_t), dtype=complex)
    np.fill_diagonal(z, complex(self_impedance))
    for sep in range(1, n_t):
        zm = mutual_impedance_parallel_dipoles(sep * spacing_wavelengths)
        for i in range(n_t - sep):
            z[i, i + sep] = zm
            z[i + sep, i] = zm
    return CouplingMatrix(z)


def save_coupling_file(path, cm: CouplingMatrix) -> None:
    """Write a coupling matrix as plain text: a header line with the element
    count, then one whitespace-separated row of ``a+bj`` entries per line."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{cm.n_t}\n")
        for row in cm.z:
            fh.write(" ".join(_format_complex(v) for v in row) + "\n")


def load_coupling_file(path) -> CouplingMatrix:
    """Read a coupling matrix written by :func:`save_coupling_file`."""
    with open(path, "r", encoding="utf-8") as fh:
        tokens = fh.read().split()
    if not tokens:
        raise ValueError(f"{path}: empty coupling file")
    try:
        n_t = int(tokens[0])
    except ValueError as exc:
        raise ValueError(f"{path}: first token must be the element count") from exc
    need = 1 + n_t * n_t
    if len(tokens) != need:
        raise ValueError(f"{path}: expected {need - 1} matrix entries, found {len(tokens) - 1}")
    try:
        entries = [complex(tok) for tok in tokens[1:]]
    except ValueError as exc:
        raise ValueError(f"{path}: malformed complex entry: {exc}") from exc
    z = np.array(entries, dtype=complex).reshape(n_t, n_t)
    return CouplingMatrix(z)


def _format_complex(v: complex) -> str:
    return f"{v.real:.17g}{v.imag:+.17g}j"
