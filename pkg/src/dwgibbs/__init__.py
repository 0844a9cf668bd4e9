"""Double-well lattice spins under diffusive dynamics: resolvent Ising reduction,
Dobrushin certificates and bad-configuration experiments."""
from .lattice import LatticeVolume, build_box
from .resolvent import ModelParams, NaturalParams, natural_params, resolvent_direct, resolvent_series
from .ising import IsingInstance, build_resolvent_ising, exact_gibbs, heatbath_mc
from .evolution import DynamicsParams, ConditionalEstimate, conditional_mu_t, time_rescale
from .dobrushin import classify_regime, dobrushin_constant, eta_influence_bound
from .badconfig import gap_experiment, gibbs_scan, make_bad_config

__version__ = "0.1.0"

__all__ = [
    "LatticeVolume", "build_box",
    "ModelParams", "NaturalParams", "natural_params", "resolvent_direct", "resolvent_series",
    "IsingInstance", "build_resolvent_ising", "exact_gibbs", "heatbath_mc",
    "DynamicsParams", "ConditionalEstimate", "conditional_mu_t", "time_rescale",
    "classify_regime", "dobrushin_constant", "eta_influence_bound",
    "gap_experiment", "gibbs_scan", "make_bad_config",
]
