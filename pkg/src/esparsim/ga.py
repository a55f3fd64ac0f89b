"""Real-coded genetic algorithm for small constrained minimizations.

Tournament selection, blend (BLX-alpha) crossover, Gaussian mutation with a
linearly decaying step size, and single-individual elitism, so the best
objective value never increases across generations. Objectives are evaluated
on the whole population at once (shape ``(pop, n_genes) -> (pop,)``), which
keeps the per-generation cost one vectorized call.

Gene bounds seed the initial population and scale the mutation, but children
may leave the box; constraint handling (penalties) is the objective's job.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import OptimizerFailed


@dataclass(frozen=True)
class GaConfig:
    population: int = 64
    generations: int = 200
    tournament_size: int = 3
    blend_alpha: float = 0.5
    mutation_prob: float = 0.2
    mutation_sigma_frac: float = 0.05   # initial sigma, fraction of gene range
    mutation_sigma_final_frac: float = 0.005
    elite: int = 1

    def __post_init__(self):
        if self.population < 2:
            raise ValueError("population must be at least 2")
        if self.generations < 1:
            raise ValueError("generations must be at least 1")
        if not 1 <= self.tournament_size <= self.population:
            raise ValueError("tournament_size out of range")
        if not 0 <= self.elite < self.population:
            raise ValueError("elite out of range")


@dataclass(frozen=True)
class GaResult:
    x: np.ndarray
    fun: float
    history: np.ndarray  # best objective after init and after each generation
    n_evaluations: int


def minimize(
    objective,
    bounds: np.ndarray,
    cfg: GaConfig,
    rng: np.random.Generator,
    seeds: np.ndarray | None = None,
) -> GaResult:
    """Minimize a batch objective over a box-scaled real genome.

    Parameters
    ----------
    objective : callable
        Maps a ``(pop, n_genes)`` array to a ``(pop,)`` array of finite or
        +inf values.
    bounds : (n_genes, 2) array
        Per-gene [low, high]; defines sampling range and mutation scale.
    seeds : optional (m, n_genes) array
        Individuals injected into the initial population (e.g. a clipped
        closed-form solution).
    """
    bounds = np.asarray(bounds, dtype=float)
    if bounds.ndim != 2 or bounds.shape[1] != 2:
        raise ValueError("bounds must have shape (n_genes, 2)")
    lo, hi = bounds[:, 0], bounds[:, 1]
    if np.any(hi < lo):
        raise ValueError("each gene needs low <= high")
    n_genes = bounds.shape[0]
    span = hi - lo

    pop = lo + rng.uniform(size=(cfg.population, n_genes)) * span
    if seeds is not None:
        seeds = np.atleast_2d(np.asarray(seeds, dtype=float))
        m = min(seeds.shape[0], cfg.population)
        pop[:m] = seeds[:m]

    fit = _evaluate(objective, pop)
    n_eval = cfg.population
    history = [float(fit.min())]

    for gen in range(cfg.generations):
        frac = gen / max(cfg.generations - 1, 1)
        sigma = span * (
            cfg.mutation_sigma_frac
            + frac * (cfg.mutation_sigma_final_frac - cfg.mutation_sigma_frac)
        )

        order = np.argsort(fit, kind="stable")
        elite_idx = order[: cfg.elite]
        n_children = cfg.population - cfg.elite

        pa = _tournament(fit, n_children, cfg.tournament_size, rng)
        pb = _tournament(fit, n_children, cfg.tournament_size, rng)
        children = _blend_crossover(pop[pa], pop[pb], cfg.blend_alpha, rng)
        mutate = rng.uniform(size=children.shape) < cfg.mutation_prob
        children = children + mutate * rng.standard_normal(children.shape) * sigma

        child_fit = _evaluate(objective, children)
        n_eval += n_children
        pop = np.concatenate([pop[elite_idx], children], axis=0)
        fit = np.concatenate([fit[elite_idx], child_fit])
        history.append(float(fit.min()))

    best = int(np.argmin(fit))
    if not np.isfinite(fit[best]):
        raise OptimizerFailed("no finite objective value found")
    return GaResult(
        x=pop[best].copy(),
        fun=float(fit[best]),
        history=np.asarray(history),
        n_evaluations=n_eval,
    )


def _evaluate(objective, pop: np.ndarray) -> np.ndarray:
    fit = np.asarray(objective(pop), dtype=float)
    if fit.shape != (pop.shape[0],):
        raise OptimizerFailed("objective returned a wrong-shaped batch")
    return np.where(np.isnan(fit), np.inf, fit)


def _tournament(fit: np.ndarray, n: int, size: int, rng: np.random.Generator) -> np.ndarray:
    entrants = rng.integers(0, fit.shape[0], size=(n, size))
    return entrants[np.arange(n), np.argmin(fit[entrants], axis=1)]


def _blend_crossover(a: np.ndarray, b: np.ndarray, alpha: float, rng: np.random.Generator) -> np.ndarray:
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)
    d = hi - lo
    return lo - alpha * d + rng.uniform(size=a.shape) * (1.0 + 2.0 * alpha) * d
