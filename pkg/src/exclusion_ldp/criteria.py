"""Single versioned table of acceptance thresholds and reference setups."""
from __future__ import annotations

from dataclasses import dataclass, field

CRITERIA_VERSION = "1.0"


@dataclass(frozen=True)
class Criterion:
    number: int
    key: str
    description: str
    thresholds: dict = field(default_factory=dict)


CRITERIA: dict[str, Criterion] = {
    c.key: c
    for c in [
        Criterion(1, "gradient_identity",
                  "two current formulas agree on all 2^4 patterns and random configurations",
                  {"tol": 1e-14, "random_configs": 1000, "max_seconds": 1.0}),
        Criterion(2, "reversibility",
                  "product measure is stationary and reversible when both reservoirs agree",
                  {"residual": 1e-12, "n_values": (2, 3, 4, 5), "densities": (0.3, 0.5),
                   "a_values": (-0.4, 0.0, 1.0), "max_seconds": 10.0}),
        Criterion(3, "hydro_limit",
                  "replica-averaged L1 error against the PDE decreases with N",
                  {"a": 1.0, "alpha": 0.2, "beta": 0.8, "horizon": 0.5, "n_values": (64, 128, 256),
                   "replicas": 100, "max_error": 0.05, "sites_per_box_at_256": 16,
                   "profile": "step:0.8,0.2", "m_cells": 512,
                   "snapshot_times": (0.0, 0.1, 0.2, 0.3, 0.4, 0.5)}),
        Criterion(4, "zero_rate",
                  "all rate methods vanish on a hydrodynamic trajectory",
                  {"max_total": 1e-3, "max_sup_H": 1e-4}),
        Criterion(5, "consistency",
                  "four rate methods agree on a controlled trajectory; elliptic round trip",
                  {"rel_tol": 0.01, "min_value": 0.01, "roundtrip_tol": 1e-4, "m_cells": 512}),
        Criterion(6, "entropy_identity",
                  "relative entropy per site of the tilted path law matches the rate",
                  {"n": 128, "replicas": 200, "stderr_mult": 2.0, "rel_band": 0.1}),
        Criterion(7, "contraction",
                  "L1 distance between hydrodynamic solutions never grows",
                  {"step_slack": 1e-8, "final_fraction": 0.1, "horizon": 5.0}),
        Criterion(8, "max_principle",
                  "solutions stay in [0,1] and move strictly inside for positive times",
                  {"clip": 1e-10, "delta_fraction": 0.05}),
        Criterion(9, "mass_balance", "per-step conservation identity of the scheme",
                  {"residual": 1e-10}),
        Criterion(10, "additivity", "rate over [0,T] equals the sum over [0,T/2] and [T/2,T]",
                  {"rel_tol": 0.005}),
    ]
}

# reference controlled experiment shared by criteria 5, 6 and 10
REFERENCE_TILT = {
    "a": 1.0, "alpha": 0.3, "beta": 0.7, "horizon": 0.5,
    "shape": "sine", "amplitude": 1.0, "t_on": 0.05, "t_full": 0.25,
}


def threshold(key: str, name: str):
    return CRITERIA[key].thresholds[name]
