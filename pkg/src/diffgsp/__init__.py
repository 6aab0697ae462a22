"""Diffusion adaptation for graph signals observed through random sampling."""
from .errors import DiffGSPError
from .graph_core import (
    Graph,
    SpectralBasis,
    FrequencySupport,
    build_graph,
    spectral_basis,
    frequency_support,
    gft,
    igft,
    load_edge_list,
)
from .sampling import SamplingDesign, SelectionObjective, greedy_select, reconstruction_condition
from .diffusion import CombinationMatrix, DiffusionConfig, Experiment, metropolis_weights, run_simulation
from .theory import build_theory, apply_H, build_H_explicit, steady_state_msd, transient_msd
from .protocol import distributed_greedy, max_consensus, flood

__version__ = "0.1.0"
