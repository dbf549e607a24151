"""Community detection in multiplex networks by orthogonal nonnegative matrix tri-factorization."""

from .assign import CommonPresence, LabeledPartition, common_presence, final_labels, label_layers
from .benchgen import (BenchmarkSpec, GroundTruth, PopulationSBM, analytic_factors, generate,
                       population_adjacency, random_population_sbm, truth_order)
from .detect import Detection, aggregated_average, detect, run_restarts
from .factorize import (FactorSet, FactorizationError, RunResult, SolverOptions, init_factors,
                        objective, run_once, single_layer_onmtf, update_Gl, update_H, update_Hl,
                        update_Sl)
from .metrics import modularity_density, multiplex_modularity_density, multiplex_nmi, nmi
from .model_order import (Linkage, ModelOrder, count_common, embed_layers, estimate_k_layer,
                          estimate_order, linkage, null_threshold)
from .multiplex import (MultiplexNetwork, aggregate_average, degree_matrix, load_labels,
                        load_multiplex, normalized_laplacian, save_labels, save_multiplex)
from .numerics import RandomStream, matmul, quantile, rand_matrix, sym_eig

__version__ = "0.1.0"
