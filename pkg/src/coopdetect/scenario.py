"""Reproducible cell-free network instances.

A scenario bundles AP/device geometry, the one-hop backhaul graph,
large-scale gains, pilot sequences, the ground-truth activity pattern and
the noise level.  All randomness flows from a single 64-bit seed through
named ``SeedSequence`` children, so identical (config, seed) pairs give
bit-identical scenarios and received signals.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidConfig

SCHEMA_VERSION = 1

# SeedSequence child indices for the per-scenario streams.
_STREAM_POSITIONS = 0
_STREAM_ACTIVITY = 1
_STREAM_PILOTS = 2
_STREAM_OBSERVATIONS = 3


@dataclass(frozen=True)
class TopologyConfig:
    """AP geometry and backhaul connectivity parameters.

    ``degree`` is the number of one-hop neighbors each AP connects to
    (its d nearest APs; the adjacency is symmetrized by union).  A degree
    of 0 gives isolated APs.
    """

    num_aps: int
    degree: int
    ap_spacing: float = 500.0
    layout: str = "grid"
    seed: int = 0

    def __post_init__(self):
        problems = []
        if self.num_aps <= 0:
            problems.append(f"num_aps must be positive, got {self.num_aps}")
        if self.degree < 0:
            problems.append(f"degree must be >= 0, got {self.degree}")
        if self.num_aps > 0 and self.degree >= self.num_aps:
            problems.append(f"degree {self.degree} must be < num_aps {self.num_aps}")
        if self.layout not in ("grid", "ring"):
            problems.append(f"layout must be 'grid' or 'ring', got {self.layout!r}")
        if self.ap_spacing <= 0:
            problems.append(f"ap_spacing must be positive, got {self.ap_spacing}")
        if problems:
            raise InvalidConfig("; ".join(problems))


def ap_positions(cfg: TopologyConfig) -> np.ndarray:
    """AP coordinates for the configured layout, shape (B, 2), meters."""
    b = cfg.num_aps
    if cfg.layout == "ring":
        if b == 1:
            return np.zeros((1, 2))
        radius = b * cfg.ap_spacing / (2.0 * math.pi)
        angles = 2.0 * math.pi * np.arange(b) / b
        return radius * np.column_stack([np.cos(angles), np.sin(angles)])
    # Square-ish lattice, filled row-major.
    ncols = math.ceil(math.sqrt(b))
    rows = np.arange(b) // ncols
    cols = np.arange(b) % ncols
    return cfg.ap_spacing * np.column_stack([cols, rows]).astype(float)


def build_topology(cfg: TopologyConfig) -> tuple[np.ndarray, tuple[tuple[int, ...], ...]]:
    """AP positions and symmetric one-hop neighbor sets.

    Each AP is first linked to its ``degree`` nearest APs (ties broken by
    lower index), then the adjacency is symmetrized by union.  The returned
    neighbor tuples exclude the AP itself.
    """
    pos = ap_positions(cfg)
    b = cfg.num_aps
    adj = np.zeros((b, b), dtype=bool)
    if cfg.degree > 0 and b > 1:
        dists = np.linalg.norm(pos[:, None, :] - pos[None, :, :], axis=2)
        for i in range(b):
            order = np.lexsort((np.arange(b), dists[i]))
            picked = [j for j in order if j != i][: cfg.degree]
            adj[i, picked] = True
        adj |= adj.T
    neighbors = tuple(tuple(int(j) for j in np.flatnonzero(adj[i])) for i in range(b))
    return pos, neighbors


def pathloss(distance_m, exponent: float = 3.7, shadow_db=0.0):
    """Power-law large-scale gain: ``max(d, 1)^-exponent * 10^(shadow/10)``.

    Unit gain at 1 m; distances are clamped below at 1 m.  ``shadow_db``
    (scalar or array) adds log-normal shadowing when nonzero.
    """
    d = np.maximum(np.asarray(distance_m, dtype=float), 1.0)
    return d ** (-exponent) * 10.0 ** (np.asarray(shadow_db, dtype=float) / 10.0)


@dataclass
class Scenario:
    """One immutable network instance plus its ground truth."""

    topology: TopologyConfig
    num_devices: int
    num_active: int
    pilot_len: int
    num_antennas: int
    snr_db: float
    noise_power: float
    ap_pos: np.ndarray            # (B, 2)
    neighbors: tuple[tuple[int, ...], ...]
    device_pos: np.ndarray        # (N, 2)
    gains: np.ndarray             # (B, N) large-scale gains g[b, n] > 0
    activity: np.ndarray          # (N,) 0/1 ground truth
    pilots: np.ndarray            # (L, N) complex pilot stack
    seed: int = 0
    gain_ref: float | None = None
    pathloss_exponent: float = 3.7
    schema_version: int = SCHEMA_VERSION

    @property
    def num_aps(self) -> int:
        return self.topology.num_aps

    def nearest_ap(self) -> np.ndarray:
        """Index of the closest AP per device (ties to the lower index)."""
        dists = np.linalg.norm(
            self.ap_pos[:, None, :] - self.device_pos[None, :, :], axis=2
        )
        return np.argmin(dists, axis=0)


@dataclass
class ApObservation:
    """Received pilot signal at one AP and its antenna-averaged covariance."""

    ap_id: int
    signal: np.ndarray | None     # (L, M) complex; None for synthetic pooled APs
    sample_cov: np.ndarray        # (L, L) Hermitian PSD, (1/M) Y Y^H


def _complex_gaussian(rng: np.random.Generator, shape, scale: float = 1.0) -> np.ndarray:
    """i.i.d. complex Gaussian entries with variance ``scale`` per entry."""
    std = math.sqrt(scale / 2.0)
    return rng.normal(0.0, std, shape) + 1j * rng.normal(0.0, std, shape)


def snr_to_noise(gains: np.ndarray, activity: np.ndarray, nearest: np.ndarray,
                 snr_db: float) -> float:
    """Noise power from the scenario's SNR convention.

    sigma^2 = median over active devices of their nearest-AP gain, divided
    by 10^(snr_db/10).  Falls back to the median over all devices when no
    device is active.
    """
    g_nearest = gains[nearest, np.arange(gains.shape[1])]
    active = np.asarray(activity) == 1
    ref = float(np.median(g_nearest[active])) if np.any(active) else float(np.median(g_nearest))
    return ref / 10.0 ** (snr_db / 10.0)


def make_scenario(
    topology: TopologyConfig,
    num_devices: int,
    num_active: int,
    pilot_len: int,
    num_antennas: int,
    snr_db: float,
    gain_ref: float | None = None,
    pathloss_exponent: float = 3.7,
) -> Scenario:
    """Draw a full scenario from ``topology.seed``.

    Devices are placed uniformly over the bounding box of the AP positions
    extended by half the AP spacing; exactly ``num_active`` devices are
    active, chosen uniformly.  Pilot entries are i.i.d. complex Gaussian
    with unit variance per entry.

    When ``gain_ref`` is set, the gain matrix is rescaled so that the
    median nearest-AP gain over all devices equals ``gain_ref``.  This
    pins the absolute scale that the solver's step sizes operate on
    without touching relative gains or the SNR definition.
    """
    problems = []
    if num_devices <= 0:
        problems.append(f"num_devices must be positive, got {num_devices}")
    if not 0 <= num_active <= num_devices:
        problems.append(f"num_active must be in [0, {num_devices}], got {num_active}")
    if pilot_len <= 0:
        problems.append(f"pilot_len must be positive, got {pilot_len}")
    if num_antennas <= 0:
        problems.append(f"num_antennas must be positive, got {num_antennas}")
    if gain_ref is not None and gain_ref <= 0:
        problems.append(f"gain_ref must be positive, got {gain_ref}")
    if problems:
        raise InvalidConfig("; ".join(problems))

    pos, neighbors = build_topology(topology)
    streams = np.random.SeedSequence(topology.seed).spawn(4)

    margin = topology.ap_spacing / 2.0
    lo = pos.min(axis=0) - margin
    hi = pos.max(axis=0) + margin
    rng_pos = np.random.default_rng(streams[_STREAM_POSITIONS])
    device_pos = rng_pos.uniform(lo, hi, size=(num_devices, 2))

    rng_act = np.random.default_rng(streams[_STREAM_ACTIVITY])
    activity = np.zeros(num_devices, dtype=np.int8)
    activity[rng_act.choice(num_devices, size=num_active, replace=False)] = 1

    rng_pil = np.random.default_rng(streams[_STREAM_PILOTS])
    pilots = _complex_gaussian(rng_pil, (pilot_len, num_devices))

    dists = np.linalg.norm(pos[:, None, :] - device_pos[None, :, :], axis=2)
    gains = pathloss(dists, exponent=pathloss_exponent)
    nearest = np.argmin(dists, axis=0)
    if gain_ref is not None:
        g_nearest = gains[nearest, np.arange(num_devices)]
        gains = gains * (gain_ref / float(np.median(g_nearest)))

    noise_power = snr_to_noise(gains, activity, nearest, snr_db)

    return Scenario(
        topology=topology,
        num_devices=num_devices,
        num_active=num_active,
        pilot_len=pilot_len,
        num_antennas=num_antennas,
        snr_db=snr_db,
        noise_power=noise_power,
        ap_pos=pos,
        neighbors=neighbors,
        device_pos=device_pos,
        gains=gains,
        activity=activity,
        pilots=pilots,
        seed=topology.seed,
        gain_ref=gain_ref,
        pathloss_exponent=pathloss_exponent,
    )


def synthesize(scenario: Scenario, noise_power: float | None = None) -> list[ApObservation]:
    """Draw the received pilot block at every AP.

    Y_b = pilots @ diag(chi * sqrt(g_b)) @ H_b + W_b, with H_b and W_b
    i.i.d. complex Gaussian (unit variance and ``noise_power`` variance per
    entry).  Deterministic given the scenario seed; channel and noise
    streams are per-AP children of the observation stream.
    """
    sigma2 = scenario.noise_power if noise_power is None else noise_power
    obs_stream = np.random.SeedSequence(scenario.seed).spawn(4)[_STREAM_OBSERVATIONS]
    ap_streams = obs_stream.spawn(scenario.num_aps)
    amp = scenario.activity * np.sqrt(scenario.gains)  # (B, N)
    out = []
    for b in range(scenario.num_aps):
        rng = np.random.default_rng(ap_streams[b])
        h = _complex_gaussian(rng, (scenario.num_devices, scenario.num_antennas))
        w = _complex_gaussian(rng, (scenario.pilot_len, scenario.num_antennas), scale=sigma2)
        y = (scenario.pilots * amp[b]) @ h + w
        sample_cov = y @ y.conj().T / scenario.num_antennas
        out.append(ApObservation(ap_id=b, signal=y, sample_cov=sample_cov))
    return out


def _complex_to_pairs(a: np.ndarray) -> list:
    return np.stack([a.real, a.imag], axis=-1).tolist()


def _pairs_to_complex(pairs) -> np.ndarray:
    arr = np.asarray(pairs, dtype=float)
    return arr[..., 0] + 1j * arr[..., 1]


def scenario_to_dict(s: Scenario) -> dict:
    """JSON-ready dict; complex values become [re, im] pairs."""
    return {
        "schema_version": s.schema_version,
        "topology": {
            "num_aps": s.topology.num_aps,
            "degree": s.topology.degree,
            "ap_spacing": s.topology.ap_spacing,
            "layout": s.topology.layout,
            "seed": s.topology.seed,
        },
        "num_devices": s.num_devices,
        "num_active": s.num_active,
        "pilot_len": s.pilot_len,
        "num_antennas": s.num_antennas,
        "snr_db": s.snr_db,
        "noise_power": s.noise_power,
        "gain_ref": s.gain_ref,
        "pathloss_exponent": s.pathloss_exponent,
        "seed": s.seed,
        "ap_pos": s.ap_pos.tolist(),
        "neighbors": [list(nb) for nb in s.neighbors],
        "device_pos": s.device_pos.tolist(),
        "gains": s.gains.tolist(),
        "activity": s.activity.tolist(),
        "pilots": _complex_to_pairs(s.pilots),
    }


def scenario_from_dict(d: dict) -> Scenario:
    if d.get("schema_version") != SCHEMA_VERSION:
        raise InvalidConfig(f"unsupported schema_version {d.get('schema_version')!r}")
    topo = TopologyConfig(**d["topology"])
    return Scenario(
        topology=topo,
        num_devices=d["num_devices"],
        num_active=d["num_active"],
        pilot_len=d["pilot_len"],
        num_antennas=d["num_antennas"],
        snr_db=d["snr_db"],
        noise_power=d["noise_power"],
        ap_pos=np.asarray(d["ap_pos"], dtype=float),
        neighbors=tuple(tuple(nb) for nb in d["neighbors"]),
        device_pos=np.asarray(d["device_pos"], dtype=float),
        gains=np.asarray(d["gains"], dtype=float),
        activity=np.asarray(d["activity"], dtype=np.int8),
        pilots=_pairs_to_complex(d["pilots"]),
        seed=d["seed"],
        gain_ref=d["gain_ref"],
        pathloss_exponent=d["pathloss_exponent"],
    )


def save_scenario(s: Scenario, path) -> None:
    with open(path, "w") as fh:
        json.dump(scenario_to_dict(s), fh)


def load_scenario(path) -> Scenario:
    with open(path) as fh:
        return scenario_from_dict(json.load(fh))


def isolated(scenario: Scenario) -> Scenario:
    """Copy of the scenario with every AP's neighbor set emptied."""
    return replace(scenario, neighbors=tuple(() for _ in range(scenario.num_aps)))
