"""Per-AP state machine and the synchronized multi-AP driver.

Each round, every live AP: takes a likelihood gradient step folded with the
joint-sparsity shrink (the z step), samples one neighbor, shrinks toward
that neighbor's last received estimate, maintains its model covariance with
rank-one updates, refreshes its subgradient estimators, and hands its new
estimate to the backhaul.  Rounds are bulk-synchronous: all APs compute on
previous-round neighbor data, then all messages are delivered at once, so
trajectories are independent of AP execution order within a round.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field

import numpy as np

from . import netsim
from .errors import ConfigMismatch, StateConsistencyError
from .linalg import cholesky_factor
from .objective import (
    Hyperparams,
    combiner_weights,
    ml_cost_given_factor,
    ml_gradient,
    similarity_prox,
    sparsity_penalty,
    sparsity_step,
    stochastic_step_size,
    subgradient_aggregate_update,
    subgradient_local_update,
)
from .scenario import ApObservation, Scenario

_SELECTION_SALT = 0x5E1EC7
_NETSIM_SALT = 0xD80B


@dataclass
class SolverOptions:
    """Behavior knobs that are not model hyperparameters."""

    lag_transmit: bool = False        # transmit the pre-update estimate instead
    freeze_combiners: bool = False    # constant uniform weights (diagnostics)
    check_state_every: int = 0        # verify covariance consistency every k rounds
    early_stop_tol: float | None = None
    record_cost: bool = True


@dataclass
class ApSolverState:
    """Mutable per-AP iterates; exclusively owned by its AP within a round."""

    ap_id: int
    neighbors: tuple[int, ...]        # one-hop neighbors, self excluded
    gamma: np.ndarray                 # (N,) current device state estimate
    sigma: np.ndarray                 # (L, L) maintained model covariance
    z: np.ndarray                     # (N,) last intermediate estimate
    x_agg: np.ndarray                 # (N,) combined subgradient estimator
    x_local: dict                     # neighbor id -> (N,) estimator (self stays 0)
    last_received: dict               # neighbor id -> (N,) their last estimate
    rng: np.random.Generator
    t: int = 0
    clamp_count: int = 0
    degenerate_count: int = 0
    last_selected: int = -1
    last_weights: np.ndarray | None = None
    last_cost: float = float("nan")
    last_delta: float = float("inf")  # inf-norm of the latest estimate change

    @property
    def inclusive_order(self) -> tuple[int, ...]:
        """Sampling order over the inclusive neighbor set: neighbors, self last."""
        return self.neighbors + (self.ap_id,)


@dataclass
class IterationTrace:
    """Append-only per-(round, AP) records of cost, choices and traffic."""

    records: list = field(default_factory=list)

    def add(self, **row) -> None:
        self.records.append(row)

    def costs(self, ap_id: int | None = None) -> np.ndarray:
        rows = [r for r in self.records if ap_id is None or r["ap"] == ap_id]
        return np.array([r["cost"] for r in rows])

    def round_costs(self) -> np.ndarray:
        """Total cost across APs per round, ordered by round."""
        totals: dict[int, float] = {}
        for r in self.records:
            totals[r["round"]] = totals.get(r["round"], 0.0) + r["cost"]
        return np.array([totals[k] for k in sorted(totals)])

    def to_csv(self, path) -> None:
        cols = ["round", "ap", "cost", "selected", "messages_sent",
                "payload_bytes", "wall_time_s", "clamped", "degenerate"]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(cols)
            for r in self.records:
                writer.writerow([r[c] for c in cols])

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.records, fh, sort_keys=True)


@dataclass
class RunResult:
    """Final estimates plus everything needed to audit the run."""

    gamma: np.ndarray                 # (B, N) final estimates, row per AP
    trace: IterationTrace
    ledger: netsim.CommLedger
    states: list
    rounds_completed: int


def init_states(scenario: Scenario, observations: list[ApObservation],
                hyper: Hyperparams) -> list[ApSolverState]:
    """Fresh solver states: zero estimates, noise-only covariance, zero estimators."""
    b = scenario.num_aps
    if len(observations) != b:
        raise ConfigMismatch(f"{len(observations)} observations for {b} APs")
    n, l = scenario.num_devices, scenario.pilot_len
    states = []
    for i, obs in enumerate(observations):
        if obs.ap_id != i:
            raise ConfigMismatch(f"observation {i} carries ap_id {obs.ap_id}")
        if obs.sample_cov.shape != (l, l):
            raise ConfigMismatch(
                f"sample covariance at AP {i} has shape {obs.sample_cov.shape}, expected {(l, l)}"
            )
        nbrs = tuple(scenario.neighbors[i])
        states.append(
            ApSolverState(
                ap_id=i,
                neighbors=nbrs,
                gamma=np.zeros(n),
                sigma=scenario.noise_power * np.eye(l, dtype=complex),
                z=np.zeros(n),
                x_agg=np.zeros(n),
                x_local={j: np.zeros(n) for j in nbrs + (i,)},
                last_received={j: np.zeros(n) for j in nbrs},
                rng=np.random.default_rng(
                    np.random.SeedSequence([_SELECTION_SALT, scenario.seed, i])
                ),
            )
        )
    return states


def _selection_probs(hyper: Hyperparams, count: int) -> np.ndarray:
    if hyper.selection_probs is None:
        return np.full(count, 1.0 / count)
    p = np.asarray(hyper.selection_probs, dtype=float)
    if p.shape != (count,) or not np.isclose(p.sum(), 1.0) or np.any(p <= 0):
        raise ConfigMismatch(f"selection_probs must be a positive length-{count} distribution")
    return p


def ap_iteration(
    state: ApSolverState,
    sample_cov: np.ndarray,
    pilots: np.ndarray,
    hyper: Hyperparams,
    neighbor_data: dict,
    options: SolverOptions | None = None,
) -> np.ndarray:
    """Run one adaptation round for a single AP; returns the outgoing payload.

    Order: gradient + sparsity shrink on the stacked estimate panel, neighbor
    sampling, adaptive combiner on previous-round estimates, similarity
    shrink toward the selected neighbor, rank-one covariance maintenance,
    subgradient bookkeeping.  Selecting the own AP (or drawing a zero
    combiner weight) degenerates the similarity step to the identity: the
    similarity penalty against oneself is identically zero, so the new
    estimate is the clamped z step and the estimators stay untouched.
    """
    options = options or SolverOptions()
    gamma_old = state.gamma
    grad = ml_gradient(gamma_old, pilots, None, sample_cov, cov=state.sigma)

    order = state.inclusive_order
    nbr_mat = (
        np.stack([neighbor_data[j] for j in state.neighbors])
        if state.neighbors
        else np.zeros((0, gamma_old.shape[0]))
    )
    panel = np.column_stack([*nbr_mat, gamma_old])
    z = sparsity_step(gamma_old, grad, state.x_agg, panel, hyper.beta, hyper.tau, hyper.eta)

    probs = _selection_probs(hyper, len(order))
    sel_idx = int(state.rng.choice(len(order), p=probs))
    selected = order[sel_idx]

    if options.freeze_combiners:
        weights = np.full(len(order), 1.0 / len(order))
    else:
        weights = combiner_weights(gamma_old, nbr_mat, hyper.rho)
    eta_sel = stochastic_step_size(float(weights[sel_idx]), hyper.eta, float(probs[sel_idx]))
    tau_eta = hyper.tau * eta_sel

    if selected == state.ap_id or tau_eta == 0.0:
        # Identity similarity step; clamp any negative z entries.
        negative = z < 0.0
        state.clamp_count += int(np.count_nonzero(negative))
        gamma_new = np.where(negative, 0.0, z)
        if tau_eta == 0.0 and selected != state.ap_id:
            state.degenerate_count += 1
    else:
        gamma_new, clamped = similarity_prox(
            z, state.x_local[selected], neighbor_data[selected], tau_eta
        )
        state.clamp_count += clamped
        x_new = subgradient_local_update(state.x_local[selected], z, gamma_new, tau_eta)
        # Interior prox solutions land in [-1, 1] on their own; when the
        # positivity clamp binds the raw recursion is unbounded, so project
        # onto the range of valid absolute-value subgradients.
        np.clip(x_new, -1.0, 1.0, out=x_new)
        state.x_agg = subgradient_aggregate_update(
            state.x_agg, float(weights[sel_idx]), x_new, state.x_local[selected]
        )
        state.x_local[selected] = x_new

    delta = gamma_new - gamma_old
    sigma = state.sigma + (pilots * delta) @ pilots.conj().T
    state.sigma = 0.5 * (sigma + sigma.conj().T)
    state.gamma = gamma_new
    state.z = z
    state.t += 1
    state.last_selected = selected
    state.last_weights = weights
    state.last_delta = float(np.max(np.abs(delta))) if delta.size else 0.0

    if options.record_cost:
        cost = ml_cost_given_factor(cholesky_factor(state.sigma), sample_cov)
        panel_new = np.column_stack([*nbr_mat, gamma_new])
        cost += hyper.beta * sparsity_penalty(panel_new, hyper.theta)
        if state.neighbors:
            sim = np.abs(gamma_new - nbr_mat).sum(axis=1)
            cost += hyper.tau * float(np.dot(weights[:-1], sim))
        state.last_cost = float(cost)
    else:
        state.last_cost = float("nan")

    return (gamma_old if options.lag_transmit else gamma_new).copy()


def verify_state(state: ApSolverState, scenario: Scenario, rtol: float = 1e-8) -> float:
    """Relative Frobenius gap between maintained and reassembled covariance.

    Raises StateConsistencyError when the gap exceeds ``rtol``; otherwise
    returns the gap.
    """
    fresh = (scenario.pilots * state.gamma) @ scenario.pilots.conj().T
    fresh += scenario.noise_power * np.eye(scenario.pilot_len)
    gap = float(np.linalg.norm(state.sigma - fresh) / np.linalg.norm(fresh))
    if gap > rtol:
        raise StateConsistencyError(
            f"AP {state.ap_id}: maintained covariance drifted (relative gap {gap:.3e})"
        )
    return gap


def run(
    scenario: Scenario,
    observations: list[ApObservation],
    hyper: Hyperparams,
    plan: netsim.FailurePlan | None = None,
    options: SolverOptions | None = None,
) -> RunResult:
    """Drive all APs for ``hyper.num_iters`` synchronized rounds.

    Every round each live AP adapts on previous-round neighbor data, then
    all messages cross the backhaul at once (subject to the failure plan);
    missed messages leave the stale copy in place.  Deterministic for a
    fixed scenario seed.
    """
    if hyper.num_iters < 1:
        raise ConfigMismatch(f"num_iters must be >= 1, got {hyper.num_iters}")
    options = options or SolverOptions()
    plan = plan or netsim.EMPTY_PLAN
    plan.validate(scenario.neighbors, hyper.num_iters)

    states = init_states(scenario, observations, hyper)
    trace = IterationTrace()
    ledger = netsim.CommLedger()
    net_rng = np.random.default_rng(np.random.SeedSequence([_NETSIM_SALT, scenario.seed]))

    rounds_completed = 0
    for t in range(1, hyper.num_iters + 1):
        messages = {}
        for state in states:
            if plan.ap_down(state.ap_id, t):
                continue
            t0 = time.perf_counter()
            payload = ap_iteration(
                state,
                observations[state.ap_id].sample_cov,
                scenario.pilots,
                hyper,
                state.last_received,
                options,
            )
            wall = time.perf_counter() - t0
            for nb in state.neighbors:
                messages[(state.ap_id, nb)] = payload
            trace.add(
                round=t,
                ap=state.ap_id,
                cost=state.last_cost,
                selected=state.last_selected,
                messages_sent=len(state.neighbors),
                payload_bytes=8 * scenario.num_devices * len(state.neighbors),
                wall_time_s=wall,
                clamped=state.clamp_count,
                degenerate=state.degenerate_count,
            )
        delivered = netsim.deliver_round(messages, plan, t, net_rng,
                                         scenario.neighbors, ledger)
        for (src, dst), payload in delivered.items():
            states[dst].last_received[src] = payload
        rounds_completed = t
        if options.check_state_every and t % options.check_state_every == 0:
            for state in states:
                if not plan.ap_down(state.ap_id, t):
                    verify_state(state, scenario)
        if options.early_stop_tol is not None:
            live = [s for s in states if not plan.ap_down(s.ap_id, t)]
            if live and max(s.last_delta for s in live) < options.early_stop_tol:
                break

    gamma = np.stack([s.gamma for s in states])
    return RunResult(gamma=gamma, trace=trace, ledger=ledger, states=states,
                     rounds_completed=rounds_completed)
