"""stabl: stability certificates for bagged learners.

Bagging turns any base learner into an (eps, delta)-stable one.  This package
provides the bag distributions, Monte Carlo and exact bagging engines,
leave-one-out stability audits, and the closed-form bounds they are checked
against.
"""
from .bagging import BaggedPredictor, EmpiricalRange, Exact, MonteCarlo, TrimmedRange, table_family_exact
from .errors import (ConfigurationError, DegenerateSchemeError, DomainError, EnumerationTooLargeError, FitError,
                     HypothesisViolatedError, ParseError, PrecisionError, StablError)
from .kernels import BACKEND
from .learners import (ConstantLearner, Dataset, Learner, LogisticLearner, LookupTableLearner, MemorizerLearner,
                       MLPLearner, ThresholdLearner, TreeLearner, parse_learner)
from .resampling import (Kind, ResamplingScheme, drop_one_scheme, enumerate_support, inclusion_probability,
                         pair_covariance_deficit, parse_scheme, sample_bag)
from .stability import (StabilityProfile, audit, delta_of_epsilon, epsilon_curve, interval_instability,
                        replace_one_audit, summaries)
from .streams import SeedStream

__version__ = "0.1.0"
