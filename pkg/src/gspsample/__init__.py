"""Graph-based sampling-set design for wireless sensor networks.

Learn a graph from sensor measurements, reconstruct signals from vertex
subsets, partition the sensors into disjoint sampling sets that each meet
an RMSE bound, and account for the duty-cycle/lifetime gain of activating
the sets round-robin.
"""

__version__ = "0.1.0"

from .graphs import (Graph, SpectralBasis, GraphSignal, GraphError,
                     EigensolverError, build_graph, spectral_decompose, gft,
                     igft, total_variation, smoothness, graph_to_dict,
                     graph_from_dict)
from .learning import (SignalMatrix, LearnConfig, ConvergenceEntry,
                       ConvergenceTrace, GraphLearnError, pairwise_distances,
                       learn_graph, graph_objective, StreamLearner)
from .reconstruction import (ReconstructionConfig, EtaGrid,
                             SingularSystemError, reconstruct,
                             reconstruct_many, tune_eta, rmse)
from .sampling import (SamplingMask, BandwidthEstimate, EmbeddingCheck,
                       SamplingPlan, PartitionError, estimate_bandwidth,
                       coherence_scores, importance_order, verify_embedding,
                       partition, SweepRow, SweepResult, set_count_sweep)
from .dataset import (MeasurementRecord, RejectReport, DatasetError,
                      DEFAULT_UNIVERSE, parse_intel, record_to_line,
                      SnapshotWindow, assemble_snapshots, window_to_csv,
                      synth_smooth, write_surrogate_intel_file)
from .lifetime import (DutyCycleReport, Schedule, ScheduleTrace, duty_cycle,
                       simulate_schedule, write_duty_csv)
from .experiment import (ExperimentConfig, ExperimentError, load_config,
                         run_experiment)
