"""Random multiuser MIMO channel generation.

Draws i.i.d. circularly-symmetric complex Gaussian link matrices for all
K*K transmitter/receiver pairs of a topology and applies the transmit-side
correlation transform for parasitic-array (closely spaced) transmitters:
``H_hat = H @ sqrt(R).T`` where ``sqrt(R)`` is the Hermitian PSD square root.

Reproducibility: all draws go through ``numpy.random.Generator`` (PCG64 via
``numpy.random.default_rng``). Trial t of a Monte-Carlo experiment uses
``default_rng(base_seed + t)``; matrices are drawn receiver-major (k outer,
transmitter l inner), real parts before imaginary parts.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import j0

from .errors import NotPsd

logger = logging.getLogger(__name__)


class ArrayKind(enum.Enum):
    """Transmit array type: ideal uncoupled/uncorrelated ULA, or single-feed
    parasitic array (whose tight spacing induces transmit correlation)."""

    IDEAL_ULA = "ula"
    ESPAR = "espar"


def hermitian_sqrt(r: np.ndarray, clip_tol: float = 1e-10) -> np.ndarray:
    """Hermitian PSD square root via eigendecomposition.

    Eigenvalues in ``[-clip_tol, 0)`` are treated as rounding noise and
    clipped to zero; anything lower raises :class:`NotPsd`.
    """
    r = np.asarray(r, dtype=complex)
    w, v = np.linalg.eigh(r)
    if w.min(initial=0.0) < -clip_tol:
        raise NotPsd(f"matrix has eigenvalue {w.min():.3e} below -{clip_tol:g}")
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.conj().T


def correlation_matrix(
    n_t: int,
    spacing_wavelengths: float = 0.14,
    model: str = "jakes",
    rho: float = 0.0,
) -> np.ndarray:
    """Transmit-side spatial correlation matrix for a uniform linear array.

    ``model="jakes"``: entries J0(2*pi*spacing*|i-j|), tying correlation to
    the physical element spacing. ``model="exponential"``: entries
    rho^|i-j| with 0 <= rho < 1. Both are repaired (eigenvalue clipping plus
    diagonal renormalization, logged) if rounding pushes them indefinite.
    """
    if n_t < 1:
        raise ValueError("n_t must be at least 1")
    idx = np.arange(n_t)
    sep = np.abs(idx[:, None] - idx[None, :])
    if model == "jakes":
        if spacing_wavelengths <= 0.0:
            raise ValueError("spacing must be positive")
        r = j0(2.0 * np.pi * spacing_wavelengths * sep).astype(complex)
    elif model == "exponential":
        if not 0.0 <= rho < 1.0:
            raise ValueError("rho must satisfy 0 <= rho < 1")
        r = (rho ** sep).astype(complex)
    else:
        raise ValueError(f"unknown correlation model: {model!r}")

    w, v = np.linalg.eigh(r)
    if w.min() < -1e-10:
        logger.warning(
            "correlation matrix indefinite (min eigenvalue %.3e); clipping", w.min()
        )
        r = (v * np.clip(w, 0.0, None)) @ v.conj().T
        d = np.sqrt(np.abs(np.diag(r).real))
        r = r / np.outer(d, d)
    return r


@dataclass(frozen=True)
class SystemTopology:
    """K communicating pairs with per-transmitter array kinds.

    ``corr[l]`` is the transmit correlation matrix of TX l (identity for an
    ideal ULA).
    """

    n_t: tuple
    n_r: tuple
    kinds: tuple
    corr: tuple

    def __post_init__(self):
        k = len(self.n_t)
        if k < 2:
            raise ValueError("a multiuser topology needs at least 2 pairs")
        if not (len(self.n_r) == len(self.kinds) == len(self.corr) == k):
            raise ValueError("per-TX field lengths disagree")
        if any(n < 1 for n in self.n_t) or any(n < 1 for n in self.n_r):
            raise ValueError("antenna counts must be at least 1")
        for l, r in enumerate(self.corr):
            r = np.asarray(r)
            if r.shape != (self.n_t[l], self.n_t[l]):
                raise ValueError(f"corr[{l}] has wrong shape")
            if not np.allclose(r, r.conj().T, atol=1e-12):
                raise NotPsd(f"corr[{l}] is not Hermitian")
            if not np.allclose(np.diag(r), 1.0, atol=1e-9):
                raise NotPsd(f"corr[{l}] does not have a unit diagonal")
            if np.linalg.eigvalsh(r).min() < -1e-10:
                raise NotPsd(f"corr[{l}] is not positive semi-definite")

    @property
    def k_users(self) -> int:
        return len(self.n_t)


def all_ula_topology(k_users: int, n_t: int = 2, n_r: int = 2) -> SystemTopology:
    """Topology with ideal ULAs everywhere."""
    eye = np.eye(n_t, dtype=complex)
    return SystemTopology(
        n_t=(n_t,) * k_users,
        n_r=(n_r,) * k_users,
        kinds=(ArrayKind.IDEAL_ULA,) * k_users,
        corr=(eye,) * k_users,
    )


def three_user_topology(
    tx2_kind: ArrayKind = ArrayKind.ESPAR,
    n_t: int = 2,
    n_r: int = 2,
    corr: np.ndarray | None = None,
    spacing_wavelengths: float = 0.14,
    corr_model: str = "jakes",
    corr_rho: float = 0.0,
) -> SystemTopology:
    """The 3-pair system studied throughout: TX 2 (index 1) is either an
    ideal ULA or the parasitic array; TXs 1 and 3 are ideal ULAs."""
    eye = np.eye(n_t, dtype=complex)
    if tx2_kind is ArrayKind.ESPAR:
        r2 = (
            np.asarray(corr, dtype=complex)
            if corr is not None
            else correlation_matrix(n_t, spacing_wavelengths, corr_model, corr_rho)
        )
    else:
        r2 = eye
    return SystemTopology(
        n_t=(n_t,) * 3,
        n_r=(n_r,) * 3,
        kinds=(ArrayKind.IDEAL_ULA, tx2_kind, ArrayKind.IDEAL_ULA),
        corr=(eye, r2, eye),
    )


@dataclass(frozen=True)
class ChannelSet:
    """All K*K link matrices of one channel realization.

    ``h_hat[k][l]`` is the effective matrix between RX k and TX l (transmit
    correlation applied for parasitic-array TXs); ``h`` keeps the underlying
    uncorrelated draw, needed by the closed-form alignment precoder. When a
    set is built by hand for an all-ULA system, ``h`` may be omitted and
    defaults to ``h_hat``.
    """

    h_hat: tuple
    h: tuple | None = None

    @property
    def k_users(self) -> int:
        return len(self.h_hat)

    @property
    def raw(self) -> tuple:
        return self.h if self.h is not None else self.h_hat


def draw_iid_channel(n_r: int, n_t: int, rng: np.random.Generator) -> np.ndarray:
    """n_r x n_t matrix of i.i.d. CN(0, 1) entries (each part variance 1/2)."""
    if n_r < 1 or n_t < 1:
        raise ValueError("dimensions must be at least 1")
    re = rng.standard_normal((n_r, n_t))
    im = rng.standard_normal((n_r, n_t))
    return (re + 1j * im) / np.sqrt(2.0)


def effective_channel(h: np.ndarray, kind: ArrayKind, r: np.ndarray | None = None) -> np.ndarray:
    """Apply the transmit-side correlation transform of a parasitic-array TX:
    ``h @ sqrt(r).T``. Ideal-ULA channels pass through unchanged."""
    if kind is ArrayKind.IDEAL_ULA:
        return h
    if r is None:
        raise ValueError("a correlation matrix is required for a parasitic-array TX")
    return h @ hermitian_sqrt(r).T


def draw_channel_set(topology: SystemTopology, rng: np.random.Generator) -> ChannelSet:
    """One realization of all K*K links, independent across links."""
    k = topology.k_users
    sqrts = [hermitian_sqrt(topology.corr[l]).T for l in range(k)]
    raw = []
    eff = []
    for rx in range(k):
        raw_row = []
        eff_row = []
        for tx in range(k):
            h = draw_iid_channel(topology.n_r[rx], topology.n_t[tx], rng)
            raw_row.append(h)
            if topology.kinds[tx] is ArrayKind.IDEAL_ULA:
                eff_row.append(h)
            else:
                eff_row.append(h @ sqrts[tx])
        raw.append(tuple(raw_row))
        eff.append(tuple(eff_row))
    return ChannelSet(h_hat=tuple(eff), h=tuple(raw))
