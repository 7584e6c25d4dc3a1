"""Programmatic labeling of software-repository artifacts.

Heuristics vote on commits and issues, an unsupervised label model combines
the votes into probabilistic labels, and the analysis layer scores both.
"""

from heurepo.artifacts import (
    CommitArtifact,
    Dataset,
    FileChange,
    IssueArtifact,
    link,
    load_commits,
    load_dataset,
    load_issues,
    validate,
)
from heurepo.heuristics import (
    HeuristicSpec,
    LabelMatrix,
    Registry,
    apply_all,
    apply_keyword,
    load_heuristics,
    tokenize,
)
from heurepo.labelmodel import (
    FitConfig,
    LabelModelParams,
    ProbLabel,
    fit,
    majority_vote,
    posterior,
    predict,
    sample_synthetic,
)
from heurepo.analysis import baseline_classify, diagnostics, evaluate, render_report
from heurepo.tasks import TaskDefinition, export, load_task, resolve_task

__version__ = "0.1.0"

__all__ = [
    "CommitArtifact",
    "Dataset",
    "FileChange",
    "FitConfig",
    "HeuristicSpec",
    "IssueArtifact",
    "LabelMatrix",
    "LabelModelParams",
    "ProbLabel",
    "Registry",
    "TaskDefinition",
    "apply_all",
    "apply_keyword",
    "baseline_classify",
    "diagnostics",
    "evaluate",
    "export",
    "fit",
    "link",
    "load_commits",
    "load_dataset",
    "load_heuristics",
    "load_issues",
    "load_task",
    "majority_vote",
    "posterior",
    "predict",
    "render_report",
    "resolve_task",
    "sample_synthetic",
    "tokenize",
    "validate",
]
