"""High-confidence bounds on password guessing curves from a finite sample."""

from .corpus import (
    FrequencyEncoding,
    FrequencyTable,
    Partition,
    SampleCorpus,
    frequency_encoding,
    load_corpus,
    merge,
    partition,
    top_g_mass,
    top_g_set,
)
from .bounds import (
    BoundPoint,
    GuessingCurve,
    ModelGuessList,
    SplitBoundParams,
    extended_lb,
    frequency_ub,
    h_count,
    load_guess_list,
    mcdiarmid_epsilon,
    prior_lb,
    prior_lb_best,
    sampling_lb,
    slack_t,
)
from .schedule import Schedule, default_schedule, derive_schedule

__version__ = "0.1.0"
