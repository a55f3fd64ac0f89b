"""Mapping desired precoding vectors to physical parasitic-array settings.

A single-feed parasitic array realizes the current vector ``v_s * b(X)``
where ``b(X)`` is the first column of ``(Z_T + X)^-1`` and ``X`` the diagonal
load matrix. For single-stream precoding the loads depend only on the
*direction* of the desired precoder ``f``: the parasitic rows give the closed
form ``x_j = -(Z_T[j,:] @ f) / f[j]``, and the feed voltage absorbs the
complex scale (``v_s = beta * s`` with ``beta = (Z_T + X)[0,:] @ f``), so the
realized per-symbol current equals ``s * f`` exactly whenever the closed form
is admissible.

When the exact loads violate the hardware box, or the dynamically matched
source impedance does, a real-coded genetic algorithm searches the box for
loads minimizing the squared error ``|f - beta * b(X)|^2`` between the
desired and realized precoders, with penalties for box and return-loss
violations. The residual of that objective is exactly the alignment error
the rate evaluation then sees.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import ga
from .coupling import (
    ConstraintBox,
    CouplingMatrix,
    LoadConfig,
    RETURN_LOSS_FLOOR_DB,
    input_impedance,
    port_currents_espar,
    return_loss_db,
)
from .errors import SingularNetwork, ZeroTargetEntry

DEFAULT_PENALTY_WEIGHT = 1e3


class SolveMethod(enum.Enum):
    CLOSED_FORM = "closed-form"
    OPTIMIZED = "optimized"


@dataclass(frozen=True)
class EsparSolution:
    """Physical settings realizing (or approximating) a precoding vector.

    ``v_s_scale`` is the per-symbol feed rule: transmit symbol s with feed
    voltage ``v_s = v_s_scale * s``. ``residual`` is the squared norm of the
    difference between the desired precoder and the realized beam
    ``v_s_scale * b(loads)``; ``chordal_distance`` is the scale-free
    direction mismatch. ``feasible`` means every load (source impedance
    included) sits in the constraint box and the return loss meets the
    budget.
    """

    loads: LoadConfig
    v_s_scale: complex
    residual: float
    return_loss: float
    method: SolveMethod
    feasible: bool
    chordal_distance: float
    ga_history: np.ndarray | None = None

    def __post_init__(self):
        if self.residual < 0.0:
            raise ValueError("residual must be non-negative")


def _check_target(target: np.ndarray, n_t: int) -> np.ndarray:
    target = np.asarray(target, dtype=complex).reshape(-1)
    if target.shape[0] != n_t:
        raise ValueError("target length does not match the array")
    return target


def loads_closed_form_general(
    z_t: CouplingMatrix,
    target: np.ndarray,
    z_s: complex | None = None,
) -> tuple:
    """Exact loads and feed voltage for a desired port-current vector.

    Parasitic load j (row j+1 of the network equation, 1-based element j+1)
    is ``-(Z_T[j,:] @ target) / target[j]``; the feed voltage then follows
    from the active row, ``v_s = Z_T[0,:] @ target + z_s * target[0]``. The
    source impedance ``z_s`` is a free parameter of the match (the parasitic
    equations do not involve it); by default it conjugate-matches the
    resulting feed-port input impedance.

    Returns ``(v_s, LoadConfig)``; feeding ``v_s`` through the returned loads
    reproduces ``target`` exactly.

    Raises :class:`ZeroTargetEntry` when a parasitic entry of ``target`` is
    numerically zero: no finite load can zero an individual parasitic
    current.
    """
    target = _check_target(target, z_t.n_t)
    scale = np.linalg.norm(target)
    if scale == 0.0:
        raise ZeroTargetEntry("target current vector is zero")
    for j in range(1, z_t.n_t):
        if abs(target[j]) <= 1e-12 * scale:
            raise ZeroTargetEntry(f"target entry {j} is numerically zero")
    xbar = np.array(
        [-(z_t.z[j, :] @ target) / target[j] for j in range(1, z_t.n_t)],
        dtype=complex,
    )
    if z_s is None:
        z_s = np.conj(input_impedance(z_t, xbar))
    v_s = complex(z_t.z[0, :] @ target + z_s * target[0])
    return v_s, LoadConfig(z_s=z_s, parasitic_loads=xbar)


def realizability_condition(z_t: CouplingMatrix, target: np.ndarray) -> bool:
    """Whether a single feed can excite the desired current vector with a
    passive input: Re{(Z_T[0,:] @ target) / target[0]} strictly positive
    (this ratio is the feed-port input impedance の the exact solve)."""
    target = _check_target(target, z_t.n_t)
    scale = np.linalg.norm(target)
    if scale == 0.0 or abs(target[0]) <= 1e-12 * scale:
        raise ZeroTargetEntry("active-element target entry is numerically zero")
    value = (z_t.z[0, :] @ target) / target[0]
    return bool(value.real > 1e-12)


def beam_vector(z_t: CouplingMatrix, loads: LoadConfig) -> np.ndarray:
    """First column of ``(Z_T + X)^-1``: the port currents excited by unit
    feed voltage, i.e. the beam the loaded array forms."""
    return port_currents_espar(z_t, loads, 1.0)


def _feed_scale(z_t: CouplingMatrix, z_s: complex, f: np.ndarray) -> complex:
    # row 0 of (Z_T + X) applied to f: the per-symbol feed voltage
    return complex(z_t.z[0, :] @ f + z_s * f[0])


def _chordal_distance(f: np.ndarray, b: np.ndarray) -> float:
    nb = np.linalg.norm(b)
    if nb == 0.0 or not np.isfinite(nb):
        return 1.0
    c = abs(np.vdot(b, f)) / (nb * np.linalg.norm(f))
    return float(np.sqrt(max(0.0, 1.0 - min(c, 1.0) ** 2)))


def _describe(z_t: CouplingMatrix, loads: LoadConfig, f: np.ndarray):
    """Realized beam, feed scale, residual, chordal distance, return loss."""
    b = beam_vector(z_t, loads)
    beta = _feed_scale(z_t, loads.z_s, f)
    residual = float(np.sum(np.abs(f - beta * b) ** 2))
    try:
        z_in = input_impedance(z_t, loads.parasitic_loads)
        rl = return_loss_db(z_in, loads.z_s)
    except SingularNetwork:
        rl = np.inf
    return b, beta, residual, _chordal_distance(f, b), rl


def solve_for_precoder_d1(
    z_t: CouplingMatrix,
    f: np.ndarray,
    box: ConstraintBox,
    ga_cfg: ga.GaConfig | None = None,
    penalty_weight: float = DEFAULT_PENALTY_WEIGHT,
    rng: np.random.Generator | None = None,
) -> EsparSolution:
    """Physical settings for a unit-norm single-stream precoder.

    Stage 1 tries the exact closed form with a conjugate-matched source; if
    loads and source fit the box (the match then trivially meets the
    return-loss budget), that solution is returned with a zero residual.
    Otherwise stage 2 runs the genetic search over the box; its best solution
    is always returned, flagged infeasible if any constraint remains
    violated.
    """
    f = np.asarray(getattr(f, "f", f), dtype=complex).reshape(-1)
    if f.shape[0] != z_t.n_t:
        raise ValueError("precoder length does not match the array")
    if abs(np.linalg.norm(f) - 1.0) > 1e-9:
        raise ValueError("precoder must be unit-norm")
    if z_t.n_t < 2:
        raise ValueError("a parasitic array needs at least 2 elements")
    if ga_cfg is None:
        ga_cfg = ga.GaConfig()
    if rng is None:
        rng = np.random.default_rng(0)

    exact_loads = None
    try:
        _, exact_loads = loads_closed_form_general(z_t, f)
    except (ZeroTargetEntry, SingularNetwork):
        pass

    if exact_loads is not None and np.all(np.isfinite(exact_loads.diagonal())):
        if exact_loads.within_box(box):
            b, beta, residual, chordal, rl = _describe(z_t, exact_loads, f)
            if rl <= box.return_loss_max:
                return EsparSolution(
                    loads=exact_loads,
                    v_s_scale=beta,
                    residual=residual,
                    return_loss=rl,
                    method=SolveMethod.CLOSED_FORM,
                    feasible=True,
                    chordal_distance=chordal,
                )

    return _optimize(z_t, f, box, ga_cfg, penalty_weight, rng, exact_loads)


def _optimize(z_t, f, box, ga_cfg, penalty_weight, rng, exact_loads) -> EsparSolution:
    n_par = z_t.n_t - 1
    bounds = np.array(
        [(box.re_min, box.re_max), (box.im_min, box.im_max)] * (n_par + 1)
    )
    objective = _make_batch_objective(z_t, f, box, penalty_weight)

    seeds = [_encode(_matched_seed(z_t, np.zeros(n_par, dtype=complex), box))]
    if exact_loads is not None and np.all(np.isfinite(exact_loads.diagonal())):
        clipped = np.array([box.clip(x) for x in exact_loads.parasitic_loads])
        seeds.insert(0, _encode(_matched_seed(z_t, clipped, box)))

    result = ga.minimize(objective, bounds, ga_cfg, rng, seeds=np.array(seeds))

    loads = _decode(result.x)
    b, beta, residual, chordal, rl = _describe(z_t, loads, f)
    feasible = loads.within_box(box) and rl <= box.return_loss_max
    return EsparSolution(
        loads=loads,
        v_s_scale=beta,
        residual=residual,
        return_loss=rl,
        method=SolveMethod.OPTIMIZED,
        feasible=feasible,
        chordal_distance=chordal,
        ga_history=result.history,
    )


def _matched_seed(z_t, xbar, box) -> LoadConfig:
    try:
        z_s = box.clip(np.conj(input_impedance(z_t, xbar)))
    except SingularNetwork:
        z_s = complex(0.5 * (box.re_min + box.re_max), 0.5 * (box.im_min + box.im_max))
    return LoadConfig(z_s=z_s, parasitic_loads=xbar)


def _encode(loads: LoadConfig) -> np.ndarray:
    diag = np.concatenate([loads.parasitic_loads, [loads.z_s]])
    return np.column_stack([diag.real, diag.imag]).reshape(-1)


def _decode(genes: np.ndarray) -> LoadConfig:
    z = genes[0::2] + 1j * genes[1::2]
    return LoadConfig(z_s=z[-1], parasitic_loads=z[:-1])


def _make_batch_objective(z_t, f, box, penalty_weight):
    n = z_t.n_t
    z = z_t.z
    rl_max = box.return_loss_max
    lo = np.array([box.re_min, box.im_min] * n)
    hi = np.array([box.re_max, box.im_max] * n)
    row0_f = complex(z[0, :] @ f)

    def objective(genes: np.ndarray) -> np.ndarray:
        pop = genes.shape[0]
        xbar = genes[:, 0:-2:2] + 1j * genes[:, 1:-2:2]   # (pop, n-1)
        z_s = genes[:, -2] + 1j * genes[:, -1]            # (pop,)
        diag = np.concatenate([z_s[:, None], xbar], axis=1)

        a = np.broadcast_to(z, (pop, n, n)).copy()
        a[:, np.arange(n), np.arange(n)] += diag
        rhs = np.zeros((pop, n), dtype=complex)
        rhs[:, 0] = 1.0
        b = _batched_solve(a, rhs)                        # (pop, n), nan if singular

        beta = row0_f + z_s * f[0]
        err = f[None, :] - beta[:, None] * b
        residual = np.sum(np.abs(err) ** 2, axis=1)

        z_in = _batched_input_impedance(z, xbar, pop)
        rl = _batched_return_loss(z_in, z_s)

        box_excess = np.sum(
            np.maximum(0.0, lo[None, :] - genes) + np.maximum(0.0, genes - hi[None, :]),
            axis=1,
        )
        rl_excess = np.maximum(0.0, rl - rl_max)
        out = residual + penalty_weight * (box_excess + rl_excess)
        return np.where(np.isfinite(out), out, np.inf)

    return objective


def _batched_solve(a: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    out = np.full(rhs.shape, np.nan, dtype=complex)
    dets = np.linalg.det(a)
    good = np.isfinite(dets) & (np.abs(dets) > 0.0)
    if np.any(good):
        try:
            out[good] = np.linalg.solve(a[good], rhs[good])
        except np.linalg.LinAlgError:
            for i in np.flatnonzero(good):
                try:
                    out[i] = np.linalg.solve(a[i], rhs[i])
                except np.linalg.LinAlgError:
                    out[i] = np.nan
    return out


def _batched_input_impedance(z: np.ndarray, xbar: np.ndarray, pop: int) -> np.ndarray:
    n = z.shape[0]
    if n == 2:
        denom = z[1, 1] + xbar[:, 0]
        with np.errstate(divide="ignore", invalid="ignore"):
            return z[0, 0] - z[0, 1] * z[1, 0] / denom
    block = np.broadcast_to(z[1:, 1:], (pop, n - 1, n - 1)).copy()
    idx = np.arange(n - 1)
    block[:, idx, idx] += xbar
    rhs = np.broadcast_to(z[1:, 0], (pop, n - 1))
    sol = _batched_solve(block, rhs)
    return z[0, 0] - np.einsum("j,pj->p", z[0, 1:], sol)


def _batched_return_loss(z_in: np.ndarray, z_s: np.ndarray) -> np.ndarray:
    denom = z_in + z_s
    with np.errstate(divide="ignore", invalid="ignore"):
        rho = np.abs((z_in - np.conj(z_s)) / denom)
        rl = np.where(rho > 0.0, 20.0 * np.log10(np.maximum(rho, 1e-300)), -np.inf)
    rl = np.maximum(rl, RETURN_LOSS_FLOOR_DB)
    return np.where(np.isfinite(z_in) & (np.abs(denom) > 0.0), rl, np.inf)
