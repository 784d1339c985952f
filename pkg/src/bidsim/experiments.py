"""Experiment harness: the episode loop, parameter sweeps and their
aggregations, and the CSV emission used by the CLI.

A run is a pure function of (auction config, hyperparams, seed): repeat
it and you get bit-identical records.  Sweep cells and their runs are
embarrassingly parallel and execute on a bounded worker pool; all
aggregation happens in a single-threaded reduce over sorted summaries,
so shuffling inputs cannot change any emitted statistic.
"""

from __future__ import annotations

import csv
import itertools
import multiprocessing
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields as dataclass_fields

import numpy as np

from .agent import DDPGAgent, Hyperparams, decay_noise, scale_action_to_price
from .env import INITIAL_OFFERS, AuctionConfig, MemoryMode, clear_auction, make_state
from .equilibrium import (
    DEFAULT_TOL_CAP,
    DEFAULT_TOL_COST,
    NEClassification,
    Regime,
    classify_final,
    ne_threshold,
)
from .errors import ConfigurationError, NumericFailure, ValidationError
from .nn import NormScheme

FINAL_WINDOW = 100          # episodes averaged for the final-offer estimate
SUSTAIN_EPISODES = 500      # window defining "converged" in the cost-seeking study


@dataclass
class RunRecord:
    """Full trajectory of one simulation run plus its NE classification."""

    run_id: str
    seed: int
    hyperparams: Hyperparams
    auction: AuctionConfig
    offers: np.ndarray            # (E, 2) executed price offers
    actions: np.ndarray           # (E, 2) executed normalized actions
    profits: np.ndarray           # (E, 2)
    clearing_price: np.ndarray    # (E,)
    noise_scale: np.ndarray       # (E,) scale in effect during the episode
    switch_flag: np.ndarray       # (E,) uint8, defined from episode 2 onward
    critic_loss: np.ndarray       # (E, 2), NaN while the buffer is filling
    actor_objective: np.ndarray   # (E, 2)
    final_offers: tuple[float, float]
    classification: NEClassification
    episodes_completed: int
    aborted: bool = False
    abort_reason: str = ""


def run_episode_loop(config: AuctionConfig, hp: Hyperparams, seed: int,
                     run_id: str | None = None,
                     final_window: int = FINAL_WINDOW,
                     tol_cap: float = DEFAULT_TOL_CAP,
                     tol_cost: float = DEFAULT_TOL_COST) -> RunRecord:
    """Iterate the one-shot auction for hp.episodes rounds with two
    independent DDPG learners and classify the final strategies.

    Numeric failure in any network aborts the run; the truncated record
    is kept and counts as non-converged.
    """
    hp.validate()
    if run_id is None:
        run_id = f"run-{seed}"
    episodes = hp.episodes
    children = np.random.SeedSequence(seed).spawn(2)
    agents = [DDPGAgent(config, hp, np.random.default_rng(children[i]))
              for i in range(2)]

    offers = np.empty((episodes, 2))
    actions = np.empty((episodes, 2))
    profits = np.empty((episodes, 2))
    clearing_price = np.empty(episodes)
    noise_scale = np.empty(episodes)
    switch_flag = np.zeros(episodes, dtype=np.uint8)
    critic_loss = np.full((episodes, 2), np.nan)
    actor_objective = np.full((episodes, 2), np.nan)

    prev_offers = INITIAL_OFFERS
    prev_low: int | None = None
    eval_sum = np.zeros(2)
    eval_count = 0
    completed = 0
    aborted = False
    abort_reason = ""

    for t in range(episodes):
        try:
            states = [make_state(hp.memory_mode, (prev_offers[i], prev_offers[1 - i]),
                                 config) for i in range(2)]
            noise_scale[t] = agents[0].noise.scale
            acts = [agents[i].act(states[i], explore=True) for i in range(2)]
            prices = [scale_action_to_price(a, config) for a in acts]
            result = clear_auction(config, prices)
            rewards = [p / config.max_profit for p in result.profits]
            next_states = [make_state(hp.memory_mode, (prices[i], prices[1 - i]),
                                      config) for i in range(2)]
            for i in range(2):
                agents[i].buffer.push(states[i], acts[i], rewards[i], next_states[i])
            for i in range(2):
                diag = agents[i].learn_step()
                if diag is not None:
                    critic_loss[t, i], actor_objective[t, i] = diag
            if t >= episodes - final_window:
                for i in range(2):
                    eval_sum[i] += scale_action_to_price(
                        agents[i].act(states[i], explore=False), config)
                eval_count += 1
            for i in range(2):
                decay_noise(agents[i].noise)
        except NumericFailure as exc:
            aborted = True
            abort_reason = str(exc)
            break

        offers[t] = prices
        actions[t] = acts
        profits[t] = result.profits
        clearing_price[t] = result.clearing_price
        low = 0 if prices[0] < prices[1] else (1 if prices[1] < prices[0] else None)
        switch_flag[t] = 1 if (prev_low is not None and low is not None
                               and low != prev_low) else 0
        prev_low = low
        prev_offers = prices
        completed = t + 1

    if eval_count > 0 and not aborted:
        final = (eval_sum[0] / eval_count, eval_sum[1] / eval_count)
    else:
        final = (float("nan"), float("nan"))
    classification = classify_final(final, ne_threshold(config), tol_cap, tol_cost)
    return RunRecord(
        run_id=run_id, seed=seed, hyperparams=hp, auction=config,
        offers=offers[:completed], actions=actions[:completed],
        profits=profits[:completed], clearing_price=clearing_price[:completed],
        noise_scale=noise_scale[:completed], switch_flag=switch_flag[:completed],
        critic_loss=critic_loss[:completed],
        actor_objective=actor_objective[:completed],
        final_offers=final, classification=classification,
        episodes_completed=completed, aborted=aborted, abort_reason=abort_reason)


def convergence_episode(offers: np.ndarray, center: float, tol: float,
                        sustain: int = SUSTAIN_EPISODES) -> float:
    """First episode opening a `sustain`-long window with both offers
    within tol of center; inf when no such window exists."""
    n = offers.shape[0]
    if n < sustain:
        return float("inf")
    ok = (np.abs(offers - center) <= tol).all(axis=1).astype(np.int64)
    run_sums = np.convolve(ok, np.ones(sustain, dtype=np.int64), mode="valid")
    hits = np.nonzero(run_sums == sustain)[0]
    return float(hits[0]) if hits.size else float("inf")


@dataclass
class RunSummary:
    """Lightweight per-run payload returned by sweep workers."""

    run_id: str
    seed: int
    cell_index: int
    aborted: bool
    is_equilibrium: bool
    final_offers: tuple[float, float]
    low_offer: float
    switch_series: np.ndarray
    convergence_episode: float
    episodes_completed: int


def summarize_run(record: RunRecord, cell_index: int = 0,
                  tol_cost: float = DEFAULT_TOL_COST,
                  sustain: int = SUSTAIN_EPISODES) -> RunSummary:
    low = min(record.final_offers)  # (nan, nan) for aborted/empty runs
    return RunSummary(
        run_id=record.run_id, seed=record.seed, cell_index=cell_index,
        aborted=record.aborted,
        is_equilibrium=record.classification.is_equilibrium,
        final_offers=record.final_offers, low_offer=low,
        switch_series=record.switch_flag.copy(),
        convergence_episode=convergence_episode(
            record.offers, record.auction.marginal_cost, tol_cost, sustain),
        episodes_completed=record.episodes_completed)


# ---------------------------------------------------------------------------
# Sweeps

@dataclass
class SweepAxis:
    param: str
    values: list


@dataclass
class SweepSpec:
    axes: list[SweepAxis]
    runs_per_cell: int
    base: Hyperparams

    def validate(self):
        if self.runs_per_cell < 1:
            raise ConfigurationError("runs_per_cell must be >= 1")
        if self.runs_per_cell > 1000:
            raise ConfigurationError(
                "runs_per_cell above 1000 would collide with the seed layout")
        names = {f.name for f in dataclass_fields(Hyperparams)}
        for axis in self.axes:
            if axis.param not in names:
                raise ConfigurationError(f"unknown sweep parameter {axis.param!r}")
            if not axis.values:
                raise ConfigurationError(f"sweep axis {axis.param!r} has no values")

    def cells(self) -> list[dict]:
        self.validate()
        combos = itertools.product(*[axis.values for axis in self.axes])
        return [dict(zip([a.param for a in self.axes], combo)) for combo in combos]


def _worker_init():
    for var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, "1")


def _summary_task(task) -> RunSummary:
    config, hp, seed, run_id, cell_index, tol_cost, sustain = task
    record = run_episode_loop(config, hp, seed, run_id, tol_cost=tol_cost)
    return summarize_run(record, cell_index, tol_cost, sustain)


def run_sweep(config: AuctionConfig, spec: SweepSpec, base_seed: int = 0,
              workers: int | None = None, tol_cost: float = DEFAULT_TOL_COST,
              sustain: int = SUSTAIN_EPISODES) -> list[RunSummary]:
    """Execute every (cell, run) pair; seeds are base + cell*1000 + run."""
    spec.validate()
    tasks = []
    for cell_index, overrides in enumerate(spec.cells()):
        hp = spec.base.with_overrides(**overrides)
        for r in range(spec.runs_per_cell):
            seed = base_seed + cell_index * 1000 + r
            tasks.append((config, hp, seed, f"cell{cell_index}-run{r}",
                          cell_index, tol_cost, sustain))
    return _map_tasks(_summary_task, tasks, workers)


def _map_tasks(fn, tasks, workers):
    if workers is None:
        workers = os.cpu_count() or 1
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    ctx = multiprocessing.get_context("spawn")
    with ProcessPoolExecutor(max_workers=workers, mp_context=ctx,
                             initializer=_worker_init) as pool:
        return list(pool.map(fn, tasks, chunksize=1))


@dataclass
class CellResult:
    cell_index: int
    params: dict
    runs: list[RunSummary]
    convergence_rate: float


def aggregate_cells(spec: SweepSpec, summaries: list[RunSummary]) -> list[CellResult]:
    """Group run summaries back into sweep cells (order-independent)."""
    ordered = sorted(summaries, key=lambda s: (s.cell_index, s.seed))
    cells = spec.cells()
    out = []
    for cell_index, params in enumerate(cells):
        runs = [s for s in ordered if s.cell_index == cell_index]
        if len(runs) != spec.runs_per_cell:
            raise ValidationError(
                f"cell {cell_index} has {len(runs)} summaries, "
                f"expected {spec.runs_per_cell}")
        rate = sum(1 for s in runs if s.is_equilibrium) / len(runs)
        out.append(CellResult(cell_index, params, runs, rate))
    return out


def default_lr_values() -> list[float]:
    """13 learning rates spanning 1e-5..1e-2, four per decade."""
    values = [m * 10.0 ** k for k in range(-5, -2) for m in (1.0, 2.5, 5.0, 7.5)]
    values.append(1e-2)
    return values


def learning_rate_sweep(config: AuctionConfig, base: Hyperparams,
                        actor_values=None, critic_values=None,
                        runs_per_cell: int = 10, base_seed: int = 0,
                        workers: int | None = None) -> list[CellResult]:
    """Per-cell equilibrium-convergence rate over an (actor, critic)
    learning-rate grid; aborted runs count as non-converged."""
    spec = SweepSpec(
        axes=[SweepAxis("lr_actor", list(actor_values or default_lr_values())),
              SweepAxis("lr_critic", list(critic_values or default_lr_values()))],
        runs_per_cell=runs_per_cell, base=base)
    summaries = run_sweep(config, spec, base_seed, workers)
    return aggregate_cells(spec, summaries)


def normalization_study(config: AuctionConfig, base: Hyperparams,
                        schemes=None, memories=None, runs_per_cell: int = 100,
                        base_seed: int = 0,
                        workers: int | None = None) -> list[CellResult]:
    """Convergence and final-offer distributions per normalization scheme
    and state-memory mode."""
    schemes = list(schemes or [NormScheme.NONE, NormScheme.LAYER, NormScheme.BATCH])
    memories = list(memories or [MemoryMode.MEMORYLESS, MemoryMode.LAST_ACTIONS])
    spec = SweepSpec(
        axes=[SweepAxis("normalization", schemes),
              SweepAxis("memory_mode", memories)],
        runs_per_cell=runs_per_cell, base=base)
    summaries = run_sweep(config, spec, base_seed, workers)
    return aggregate_cells(spec, summaries)


def buffer_and_decay_sweep(config: AuctionConfig, base: Hyperparams,
                           buffer_values=None, decay_values=None,
                           runs_per_cell: int = 5, base_seed: int = 0,
                           workers: int | None = None,
                           tol_cost: float = DEFAULT_TOL_COST,
                           sustain: int = SUSTAIN_EPISODES) -> list[CellResult]:
    """Time-to-sustained-marginal-cost table for the unconstrained regime."""
    if ne_threshold(config).regime != Regime.UNCONSTRAINED:
        raise ValidationError(
            "buffer/decay sweep requires an unconstrained config (D <= capacity)")
    spec = SweepSpec(
        axes=[SweepAxis("buffer_capacity", list(buffer_values or [50_000, 5_000, 500])),
              SweepAxis("noise_decay", list(decay_values or [0.999]))],
        runs_per_cell=runs_per_cell, base=base)
    summaries = run_sweep(config, spec, base_seed, workers, tol_cost, sustain)
    return aggregate_cells(spec, summaries)


# ---------------------------------------------------------------------------
# Aggregate statistics

def cdf_on_grid(values, grid) -> np.ndarray:
    """Empirical CDF of `values` evaluated at each grid point."""
    vals = np.sort(np.asarray([v for v in values if np.isfinite(v)], dtype=float))
    if vals.size == 0:
        return np.zeros(len(grid))
    return np.searchsorted(vals, np.asarray(grid), side="right") / vals.size


def competitiveness_series(summaries, window: int = 100) -> np.ndarray:
    """Per-episode mean switch rate across runs, trailing rolling average.

    Aborted (truncated) runs are excluded; remaining series must share a
    length of at least `window` episodes.
    """
    kept = sorted((s for s in summaries if not s.aborted),
                  key=lambda s: (s.cell_index, s.seed))
    if not kept:
        raise ValidationError("no completed runs to aggregate")
    lengths = {len(s.switch_series) for s in kept}
    if len(lengths) != 1:
        raise ValidationError("runs have differing episode counts")
    episodes = lengths.pop()
    if episodes < window:
        raise ValidationError("need at least `window` episodes")
    stacked = np.stack([s.switch_series for s in kept]).astype(float)
    mean = stacked.mean(axis=0)
    csum = np.concatenate([[0.0], np.cumsum(mean)])
    out = np.empty(episodes)
    for t in range(episodes):
        lo = max(0, t - window + 1)
        out[t] = (csum[t + 1] - csum[lo]) / (t + 1 - lo)
    return out


# ---------------------------------------------------------------------------
# CSV emission (fixed column order, full-precision floats)

def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


TRAJECTORY_HEADER = [
    "episode", "offer_0", "offer_1", "action_0", "action_1",
    "profit_0", "profit_1", "clearing_price", "noise_scale",
    "critic_loss_0", "critic_loss_1",
    "actor_objective_0", "actor_objective_1", "switch_flag",
]


def write_trajectory_csv(path, record: RunRecord) -> None:
    rows = (
        [t,
         record.offers[t, 0], record.offers[t, 1],
         record.actions[t, 0], record.actions[t, 1],
         record.profits[t, 0], record.profits[t, 1],
         record.clearing_price[t], record.noise_scale[t],
         record.critic_loss[t, 0], record.critic_loss[t, 1],
         record.actor_objective[t, 0], record.actor_objective[t, 1],
         int(record.switch_flag[t])]
        for t in range(record.episodes_completed)
    )
    _write_csv(path, TRAJECTORY_HEADER, rows)


RUN_SUMMARY_HEADER = [
    "run_id", "seed", "episodes_completed", "aborted",
    "final_offer_0", "final_offer_1", "is_equilibrium",
    "low_bidder_index", "tolerance_used", "regime", "low_threshold", "high_price",
]


def write_run_summary_csv(path, records, config: AuctionConfig) -> None:
    spec = ne_threshold(config)
    rows = (
        [r.run_id, r.seed, r.episodes_completed, int(r.aborted),
         r.final_offers[0], r.final_offers[1],
         int(r.classification.is_equilibrium),
         r.classification.low_bidder_index,
         r.classification.tolerance_used,
         spec.regime.value, spec.low_threshold, spec.high_price]
        for r in records
    )
    _write_csv(path, RUN_SUMMARY_HEADER, rows)


def write_heatmap_csv(path, cells: list[CellResult]) -> None:
    rows = ([c.params["lr_actor"], c.params["lr_critic"], c.convergence_rate]
            for c in cells)
    _write_csv(path, ["actor_lr", "critic_lr", "convergence_rate"], rows)


def write_cdf_csv(path, grid, fractions) -> None:
    _write_csv(path, ["price", "cumulative_fraction"],
               ([p, f] for p, f in zip(grid, fractions)))


def write_switches_csv(path, series_by_label: dict[str, np.ndarray]) -> None:
    labels = list(series_by_label)
    length = max(len(s) for s in series_by_label.values())
    rows = ([t] + [series_by_label[k][t] if t < len(series_by_label[k]) else ""
                   for k in labels]
            for t in range(length))
    _write_csv(path, ["episode"] + labels, rows)


def write_buffer_decay_csv(path, cells: list[CellResult]) -> None:
    rows = []
    for c in cells:
        times = [s.convergence_episode for s in c.runs]
        converged = sum(1 for t in times if np.isfinite(t))
        rows.append([c.params["buffer_capacity"], c.params["noise_decay"],
                     len(times), converged, float(np.median(times))])
    _write_csv(path, ["buffer_capacity", "noise_decay", "runs", "converged",
                      "median_convergence_episode"], rows)


def write_buffer_decay_runs_csv(path, cells: list[CellResult]) -> None:
    rows = []
    for c in cells:
        for s in c.runs:
            rows.append([c.params["buffer_capacity"], c.params["noise_decay"],
                         s.run_id, s.seed, s.convergence_episode])
    _write_csv(path, ["buffer_capacity", "noise_decay", "run_id", "seed",
                      "convergence_episode"], rows)
