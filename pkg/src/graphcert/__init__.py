"""Certified robustness of graph classifiers against edge flips via
Bernoulli randomized smoothing."""

from .bitgraph import (GraphRecord, Perturbation, apply_perturbation, decode_bits,
                       encode_graph, matrix_l0_of)
from .dpcert import DpCertificate, dp_radius, expectation_dp_check, robustness_condition, run_dp_oracle_suite
from .noise import SmoothingParams, beta_from_epsilon, epsilon_from_beta, sample_noise
from .npcert import (NpCertificate, RegionTable, certified_radius, lower_bound_yA,
                     oracle_end_to_end, oracle_region_probs, region_table, upper_bound_yB)
from .pipeline import Certificate, certified_accuracy, certify_node, predict_and_certify, run_sweep
from .stats import binomial_two_sided_pvalue, clopper_pearson_lower

__version__ = "0.1.0"
