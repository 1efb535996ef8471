"""Dose-finding for drug-combination phase I trials under partially ordered toxicity.

The package covers the full loop: candidate ordering construction, Bayesian
inference over the orderings (selection and model-averaging estimators),
estimation/escalation coherency auditing, operating-characteristics simulation,
patient-level replay of completed trials, and a CLI plus HTTP service for
conducting a live trial.
"""

from .casestudy import (
    ResponseSequences,
    SourceTrialData,
    bundled_source_data,
    change_summary,
    generate_sequences,
    replay,
)
from .coherency import (
    CoherencyEvent,
    CoherencyReport,
    audit_trial,
    check_escalation,
    check_estimation,
)
from .engine import (
    CohortRecord,
    DesignConfig,
    OutcomesExhaustedError,
    SequenceOutcomes,
    TrialRecord,
    bernoulli_outcomes,
    compute_snapshot,
    recommend_dose,
    run_cohort,
    run_trial,
)
from .inference import (
    EstimateSnapshot,
    PriorSpec,
    QuadratureError,
    Skeleton,
    TrialState,
    bma_estimates,
    indifference_skeleton,
    log_likelihood,
    marginal_likelihood,
    pocrm_estimates,
    posterior_dose_expectations,
    posterior_mean_a,
    posterior_model_probs,
    working_model,
)
from .orderings import (
    DoseGrid,
    OrderingSet,
    SimpleOrdering,
    ToxicitySets,
    standard_orderings,
    toxicity_sets,
    validate_orderings,
)
from .simulator import (
    OperatingCharacteristics,
    Scenario,
    classify_doses,
    compare_methods,
    load_scenario,
    run_study,
    starter_scenarios,
)

__version__ = "0.1.0"
