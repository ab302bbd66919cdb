"""Hardness toolkit for approximate join-query processing.

Closed-form information lower bounds, intersection-bounded set designs,
paired hard-instance generators, an exact join oracle, Bernoulli-sampling
estimators, and an experiment harness tying them together.
"""

from .estimators import (
    SamplingPlan,
    TrialResult,
    bernoulli_estimate,
    miss_probability,
    plan_samples,
    sample_group_reporter,
    sample_relations,
    variance_bound,
)
from .harness import (
    ExperimentConfig,
    ExperimentRecord,
    run_distinguishing_game,
    run_experiment,
    run_upper_lower_sweep,
    verify_run,
)
from .joinexec import BudgetExceeded, chain_count_by_frequency, exact_eval, top_k_frequencies
from .kabset import (
    ConstructionError,
    KabSet,
    VerifyReport,
    family_size_from_beta,
    intersection_histogram,
    kab_construct,
    kab_verify,
)
from .mathcore import (
    BoundParams,
    BoundResult,
    DomainError,
    PreconditionError,
    QueryKind,
    beta_bound,
    binary_entropy,
    capacity_C,
    capacity_Cprime,
    lower_bound,
)
from .reldata import Aggregate, AggKind, GroupReport, JoinQuery, Relation, SchemaError, Topology
from .relgen import (
    AdversarialInstance,
    AdversarialSpec,
    InstanceInfeasible,
    SnapError,
    gen_chain4,
    gen_count,
    gen_count_distinct,
    gen_group_by,
    gen_heavy_hitter,
    gen_pk_fk,
    generate,
    snap_params,
)
from .storage import load_instance, load_records, save_instance

__version__ = "0.1.0"
