"""Trace-driven out-of-order core model with profile-guided memory
dependence prediction."""

from .core import (CoreConfig, DeltaReport, Preset, PRESETS, SimReport,
                   compare_runs, preset_core, simulate)
from .predictors import (BypassWrapper, MdpInterface, NeverPredictor,
                         OraclePredictor, Phast, Prediction, PredictorConfig,
                         StoreSets, xs_storesets)
from .profiler import (LabelSet, ProfileComparison, StoreDistanceProfile,
                       compare_label_sets, label_loads, merge_profiles,
                       profile_trace, select_distance, store_distance_oracle)
from .search import SearchResult, geomean, search_threshold
from .trace import Trace, TraceEvent, parse_trace, serialize_trace
from .workloads import (gen_alias_storm, gen_dependent_chain, gen_pixel_avg,
                        gen_pressure_mix, gen_random_trace)

__version__ = "0.1.0"
