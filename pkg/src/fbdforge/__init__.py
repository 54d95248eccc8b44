"""fbdforge: learn next-block statistics from function-block design
corpora, synthesize context pretraining data, train per-step action
models, and generate complete programs under requirement budgets."""

from .core import (
    Corpus,
    CorpusError,
    DesignStep,
    FbdProgram,
    SymbolDef,
    SymbolMultiset,
    UnknownSymbolError,
    ValidationReport,
    Vocabulary,
    dump_corpus,
    load_corpus,
    load_vocabulary,
    multiset_of,
    validate_program,
)
from .stats import (
    RankedRecommendation,
    Smoothing,
    SymbolDistribution,
    TransitionTable,
    build_table,
    conditional_prob,
    estimate_prior,
    recommend,
)
from .fiona import (
    CandidatePairSet,
    ExclusionSchedule,
    SequenceDraft,
    WeightedPairSet,
    build_context_dataset,
    enumerate_pairs,
    sample_pair,
    tau_extend,
    weight_pairs,
)
from .models import (
    ActionModel,
    ActionModelSpec,
    ErrorSurface,
    TransitionDataset,
    export_error_surface,
    gradient_check,
    predict,
    slice_transitions,
    train,
)
from .federation import (
    Federation,
    GenerationConfig,
    evaluate_federation,
    generate,
    load_federation,
    save_federation,
    train_federation,
)
from .requirements import (
    MappingRuleTable,
    RequirementDoc,
    derive_multiset,
    parse_requirements,
    parse_rule_table,
)

__version__ = "0.1.0"
