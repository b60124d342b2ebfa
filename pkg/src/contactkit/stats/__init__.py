"""Conditioned replica batches and the estimators computed from them."""

from .batch import ReplicaBatch, ReplicaRecord, ReplicaSimulator, run_replicas
from .estimators import (
    MomentStats,
    MuEstimate,
    OrderStats,
    RhoEstimate,
    TailCurve,
    estimate_mu,
    estimate_rho,
    sigma_gap_tail,
    theorem1_order_stats,
    theorem2_moment_stats,
)
from .intervals import wilson_interval

__all__ = [
    "MomentStats",
    "MuEstimate",
    "OrderStats",
    "ReplicaBatch",
    "ReplicaRecord",
    "ReplicaSimulator",
    "RhoEstimate",
    "TailCurve",
    "estimate_mu",
    "estimate_rho",
    "run_replicas",
    "sigma_gap_tail",
    "theorem1_order_stats",
    "theorem2_moment_stats",
    "wilson_interval",
]
