"""Method implementations, schedules, models and traces."""

from .methods import run_prox_sgd, run_rr, run_sgd, run_smm, rr_epoch, smm_theta
from .models import (MODEL_TYPES, AbsCompositeSample, FiniteSampleModel, OracleSubgradientModel,
                     SampleAverageObjective, SmoothSample, build_smm_problem, finite_sum_model,
                     smm_subproblem)
from .schedules import SCHEDULE_KINDS, Schedule, make_schedule, schedule_value
from .trace import Trace, default_stride, measure_mask

__all__ = [
    "run_sgd", "run_rr", "rr_epoch", "run_prox_sgd", "run_smm", "smm_theta",
    "MODEL_TYPES", "AbsCompositeSample", "SmoothSample", "SampleAverageObjective",
    "OracleSubgradientModel", "FiniteSampleModel", "smm_subproblem", "build_smm_problem",
    "finite_sum_model", "SCHEDULE_KINDS", "Schedule", "make_schedule", "schedule_value",
    "Trace", "default_stride", "measure_mask",
]
