"""Transmit precoders and receive filters for the K-user interference channel.

Two designs are implemented for single-stream transmission:

* the closed-form alignment solution for the 3-user 2x2 system, which
  confines both interferers at every receiver to a single spatial direction;
* the iterative max-SINR algorithm (alternating filter/precoder updates via
  interference-plus-noise covariance inverses), which outperforms pure
  alignment in the noise-limited regime and approaches it at high power.

All returned vectors are unit-norm. Eigenvectors and filters follow a fixed
phase convention (first nonzero entry real positive) so outputs are
reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelSet, hermitian_sqrt
from .errors import RankError, SingularChannel

_UNIT_NORM_TOL = 1e-12
_EIG_TIE_RTOL = 1e-9
_COND_CAP = 1e12


@dataclass(frozen=True)
class Precoder:
    """Unit-norm transmit beamforming vector (single stream)."""

    f: np.ndarray
    d_k: int = 1

    def __post_init__(self):
        f = np.asarray(self.f, dtype=complex).reshape(-1)
        if abs(np.linalg.norm(f) - 1.0) > _UNIT_NORM_TOL:
            raise ValueError("precoder must be unit-norm")
        f.setflags(write=False)
        object.__setattr__(self, "f", f)


@dataclass(frozen=True)
class ReceiveFilter:
    """Unit-norm receive combining vector."""

    u: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u, dtype=complex).reshape(-1)
        if abs(np.linalg.norm(u) - 1.0) > _UNIT_NORM_TOL:
            raise ValueError("receive filter must be unit-norm")
        u.setflags(write=False)
        object.__setattr__(self, "u", u)


@dataclass(frozen=True)
class MaxSinrConfig:
    """Settings of the alternating max-SINR iteration."""

    power: float
    noise_vars: np.ndarray
    max_iterations: int = 100
    convergence_tol: float = 1e-6

    def __post_init__(self):
        object.__setattr__(
            self, "noise_vars", np.atleast_1d(np.asarray(self.noise_vars, dtype=float))
        )
        if self.power <= 0.0:
            raise ValueError("power must be positive")
        if np.any(self.noise_vars <= 0.0):
            raise ValueError("noise variances must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.convergence_tol <= 0.0:
            raise ValueError("convergence_tol must be positive")


def phase_normalize(v: np.ndarray) -> np.ndarray:
    """Rotate a vector so its first non-negligible entry is real positive."""
    v = np.asarray(v, dtype=complex)
    norm = np.linalg.norm(v)
    for x in v:
        if abs(x) > 1e-12 * norm:
            return v * (x.conjugate() / abs(x))
    return v


def unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def _checked_solve(a: np.ndarray, b: np.ndarray, what: str) -> np.ndarray:
    cond = np.linalg.cond(a)
    if not np.isfinite(cond) or cond > _COND_CAP:
        raise SingularChannel(f"{what} is numerically singular (cond={cond:.3e})")
    return np.linalg.solve(a, b)


def dominant_eigenvector(a: np.ndarray) -> np.ndarray:
    """Unit eigenvector of the largest-magnitude eigenvalue.

    Ties (equal magnitude within relative 1e-9) are broken by larger real
    part, then by lexicographically larger phase-normalized eigenvector, so
    degenerate inputs such as the identity still give a fixed answer (e_1).
    """
    w, v = np.linalg.eig(a)
    cols = [unit(phase_normalize(v[:, i])) for i in range(v.shape[1])]
    scale = np.abs(w).max(initial=0.0)

    def key(i):
        lex = tuple(x for c in cols[i] for x in (c.real, c.imag))
        return (round_to(abs(w[i]), scale), round_to(w[i].real, scale), lex)

    def round_to(x, s):
        # quantize so near-ties compare equal and fall through to the next key
        if s == 0.0:
            return 0.0
        return np.round(x / (s * _EIG_TIE_RTOL)) * (s * _EIG_TIE_RTOL)

    best = max(range(len(cols)), key=key)
    return cols[best]


def ia_closed_form_3user(channels: ChannelSet, r2: np.ndarray | None = None) -> list:
    """Closed-form alignment precoders for the 3-user 2x2 system.

    TX 2 may be a parasitic array with transmit correlation ``r2``; its
    precoder is pre-compensated by the inverse-transpose correlation square
    root so the effective channel still sees the aligned direction. Passing
    ``r2=None`` (or the identity) gives the plain uncorrelated solution.

    Returns the three unit-norm precoders; at every receiver the two
    cross-link interference vectors are collinear.
    """
    h = channels.raw
    if channels.k_users != 3:
        raise ValueError("the closed form applies to exactly 3 users")
    for k in range(3):
        for l in range(3):
            if h[k][l].shape != (2, 2):
                raise ValueError("the closed form applies to 2x2 links")

    # e = H31^-1 H32 H12^-1 H13 H23^-1 H21, evaluated right-to-left by solves
    m = _checked_solve(h[1][2], h[1][0], "H23")
    m = _checked_solve(h[0][1], h[0][2] @ m, "H12")
    e = _checked_solve(h[2][0], h[2][1] @ m, "H31")
    f1 = dominant_eigenvector(e)

    g2 = _checked_solve(h[2][1], h[2][0] @ f1, "H32")
    if r2 is not None and not np.allclose(r2, np.eye(2), atol=1e-14):
        s2 = hermitian_sqrt(np.asarray(r2, dtype=complex))
        g2 = _checked_solve(s2.T, g2, "sqrt(R2)")
    f2 = phase_normalize(unit(g2))

    g3 = _checked_solve(h[1][2], h[1][0] @ f1, "H23")
    f3 = phase_normalize(unit(g3))

    return [Precoder(f1), Precoder(f2), Precoder(f3)]


def interference_directions(channels: ChannelSet, precoders, k: int) -> np.ndarray:
    """Columns are the interference vectors H_hat[k][l] f_l, l != k."""
    cols = [
        channels.h_hat[k][l] @ precoders[l].f
        for l in range(channels.k_users)
        if l != k
    ]
    return np.stack(cols, axis=1)


def receive_filter_zero_forcing(
    channels: ChannelSet, precoders, k: int, rank_tol: float = 1e-8
) -> ReceiveFilter:
    """Unit filter orthogonal to the (aligned, one-dimensional) interference
    subspace at RX k.

    Raises :class:`RankError` when the interference spans the full receive
    space, i.e. the precoders do not align.
    """
    m = interference_directions(channels, precoders, k)
    u_svd, s, _ = np.linalg.svd(m)
    n_r = m.shape[0]
    if s.shape[0] >= n_r and s[n_r - 1] > rank_tol * s[0]:
        raise RankError(
            f"interference at RX {k} spans the full receive space "
            f"(singular values {s})"
        )
    return ReceiveFilter(phase_normalize(u_svd[:, -1]))


def _interference_covariance(vectors, power: float, noise_var: float, dim: int) -> np.ndarray:
    c = noise_var * np.eye(dim, dtype=complex)
    for v in vectors:
        c += power * np.outer(v, v.conj())
    return c


def update_receive_filters(channels: ChannelSet, precoders, cfg: MaxSinrConfig) -> list:
    """Forward half-step: per-stream SINR-optimal unit filters for fixed
    precoders, ``u_k = B_k^-1 H_hat[k,k] f_k`` (normalized), with ``B_k`` the
    interference-plus-noise covariance at RX k."""
    k_users = channels.k_users
    filters = []
    for k in range(k_users):
        vecs = [channels.h_hat[k][l] @ precoders[l].f for l in range(k_users) if l != k]
        b = _interference_covariance(vecs, cfg.power, float(cfg.noise_vars[k]),
                                     channels.h_hat[k][k].shape[0])
        u = np.linalg.solve(b, channels.h_hat[k][k] @ precoders[k].f)
        filters.append(ReceiveFilter(unit(u)))
    return filters


def update_precoders(channels: ChannelSet, filters, cfg: MaxSinrConfig) -> list:
    """Backward half-step on the reciprocal channel: ``f_k = C_k^-1
    H_hat[k,k]^H u_k`` (normalized), with ``C_k`` accumulating the
    interference TX k causes at the other receivers."""
    k_users = channels.k_users
    precoders = []
    for k in range(k_users):
        vecs = [
            channels.h_hat[l][k].conj().T @ filters[l].u
            for l in range(k_users)
            if l != k
        ]
        c = _interference_covariance(vecs, cfg.power, float(cfg.noise_vars[k]),
                                     channels.h_hat[k][k].shape[1])
        f = np.linalg.solve(c, channels.h_hat[k][k].conj().T @ filters[k].u)
        precoders.append(Precoder(unit(f)))
    return precoders


def max_sinr_iterate(
    channels: ChannelSet,
    cfg: MaxSinrConfig,
    rng: np.random.Generator,
) -> tuple:
    """Alternating max-SINR optimization of precoders and receive filters.

    Starts from random unit-norm precoders drawn from ``rng``, alternates
    filter and precoder updates, and stops once the stacked precoder change
    (Frobenius) drops below ``cfg.convergence_tol`` or ``cfg.max_iterations``
    is reached. Returns ``(precoders, filters, iterations_used)``.
    """
    k_users = channels.k_users
    if cfg.noise_vars.shape[0] == 1 and k_users > 1:
        cfg = MaxSinrConfig(
            power=cfg.power,
            noise_vars=np.full(k_users, float(cfg.noise_vars[0])),
            max_iterations=cfg.max_iterations,
            convergence_tol=cfg.convergence_tol,
        )
    precoders = []
    for k in range(k_users):
        n_t = channels.h_hat[k][k].shape[1]
        v = rng.standard_normal(n_t) + 1j * rng.standard_normal(n_t)
        precoders.append(Precoder(unit(v)))

    iterations = 0
    for _ in range(cfg.max_iterations):
        filters = update_receive_filters(channels, precoders, cfg)
        new_precoders = update_precoders(channels, filters, cfg)
        iterations += 1
        change = np.sqrt(
            sum(
                float(np.sum(np.abs(new_precoders[k].f - precoders[k].f) ** 2))
                for k in range(k_users)
            )
        )
        precoders = new_precoders
        if change < cfg.convergence_tol:
            break
    filters = update_receive_filters(channels, precoders, cfg)
    return precoders, filters, iterations


def sinr_of_stream(
    channels: ChannelSet,
    precoders,
    filters,
    k: int,
    power: float,
    noise_var: float,
) -> float:
    """Post-combining SINR of stream k."""
    u = filters[k].u
    sig = power * abs(u.conj() @ (channels.h_hat[k][k] @ precoders[k].f)) ** 2
    interf = sum(
        abs(u.conj() @ (channels.h_hat[k][l] @ precoders[l].f)) ** 2
        for l in range(channels.k_users)
        if l != k
    )
    return float(sig / (power * interf + noise_var * float(np.linalg.norm(u)) ** 2))
