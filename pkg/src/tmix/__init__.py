"""tmix: asymptotic and finite-size analysis of two-group teacher mixtures.

A binary classifier is trained on data whose inputs come from two Gaussian
clouds (groups), each labelled by its own linear teacher.  The package
provides the exact high-dimensional prediction of the trained classifier's
per-group confusion matrices (replica saddle point), a matching finite-d
trainer for validation, and sweep tooling for two mitigation knobs: loss
reweighing and elastically coupled per-group classifiers.
"""

from .erm import (
    TrainedModel,
    evaluate,
    loss_and_gradient,
    split_dataset,
    train_coupled,
    train_single,
)
from .generative import (
    Dataset,
    TeacherPair,
    build_teacher_geometry,
    empirical_overlaps,
    load_dataset,
    sample_dataset,
    save_dataset,
)
from .observables import (
    MI_CRITERIA,
    FairnessReport,
    JointConfusion,
    confusion_from_theta,
    confusion_theory,
    disparate_impact,
    fairness_report,
    generalisation_error,
    label_frequency,
    mutual_information,
    report_from_confusions,
)
from .params import (
    ConjugateParams,
    GenerativeParams,
    InfeasibleGeometryError,
    NoBracketError,
    OrderParams,
    PoleError,
    ReweighWeights,
    SaddleSolution,
    SolverConfig,
    TrainHyper,
)
from .replica import (
    BACKEND,
    Channel,
    coupled_channels,
    energetic_term,
    fixed_point_solve,
    reweigh_corrupted_channels,
    single_student_channels,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "Channel",
    "ConjugateParams",
    "Dataset",
    "FairnessReport",
    "GenerativeParams",
    "InfeasibleGeometryError",
    "JointConfusion",
    "MI_CRITERIA",
    "NoBracketError",
    "OrderParams",
    "PoleError",
    "ReweighWeights",
    "SaddleSolution",
    "SolverConfig",
    "TeacherPair",
    "TrainHyper",
    "TrainedModel",
    "build_teacher_geometry",
    "confusion_from_theta",
    "confusion_theory",
    "coupled_channels",
    "disparate_impact",
    "empirical_overlaps",
    "energetic_term",
    "evaluate",
    "fairness_report",
    "fixed_point_solve",
    "generalisation_error",
    "label_frequency",
    "load_dataset",
    "loss_and_gradient",
    "mutual_information",
    "report_from_confusions",
    "reweigh_corrupted_channels",
    "sample_dataset",
    "save_dataset",
    "single_student_channels",
    "split_dataset",
    "train_coupled",
    "train_single",
]
