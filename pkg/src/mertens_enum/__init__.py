"""Lattice enumeration search for large weighted zeta-zero cosine sums."""
from .enumeration import (EnumCandidate, EnumTarget, PruningProfile, enumerate_bdd, enumerate_svp,
                          full_profile, gaussian_estimate, linear_beta_profile)
from .evaluator import CandidateReport, IntervalValue, correlation_report, eval_h, eval_qN, to_bound
from .lattice import (BasisProfile, GramSchmidtData, LatticeBasis, determinant, gram_schmidt,
                      profile)
from .mertens import (CandidateY, MertensInstance, MertensParams, Sign, build_instance,
                      predict_ranges, radius, recover_y)
from .reduction import ReductionParams, TransformationLog, bkz_progressive, lll, size_reduce
from .zeros import Mode, WeightedZero, ZeroDataset, ZetaZero, parse_zero_file, take_top, weight_dataset

__version__ = "0.1.0"
