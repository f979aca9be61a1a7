"""Doubly sparse parallel Gibbs sampling for LDA with Poisson-urn topic-word draws."""

__version__ = "0.1.0"

from . import backend
from .corpus import Corpus, Vocabulary, read_uci_bow, synth_corpus, write_uci_bow
from .randdist import (AliasTable, PoissonAliasCache, Rng, dirichlet_sample,
                       gamma_sample, poisson_cached_sample, poisson_sample,
                       ppu_asymptotic_moments, ppu_sample_direct,
                       ppu_sample_hier)
from .sampler import (IterationMetrics, SamplerConfig, Trainer,
                      collapsed_iteration, draw_phi_pc, draw_phi_pu,
                      draw_z_token, run_iteration)
from .stats import SparsePhi, TopicState, init_state, rebuild_a_tables, recount

__all__ = [
    "AliasTable", "Corpus", "IterationMetrics", "PoissonAliasCache", "Rng",
    "SamplerConfig", "SparsePhi", "TopicState", "Trainer", "Vocabulary",
    "backend", "collapsed_iteration", "dirichlet_sample", "draw_phi_pc",
    "draw_phi_pu", "draw_z_token", "gamma_sample", "init_state",
    "poisson_cached_sample", "poisson_sample", "ppu_asymptotic_moments",
    "ppu_sample_direct", "ppu_sample_hier", "read_uci_bow", "rebuild_a_tables",
    "recount", "run_iteration", "synth_corpus", "write_uci_bow",
]
