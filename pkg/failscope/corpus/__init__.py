from .builder import ORIGINAL_ID, RunResult, RunTask, build_corpus, corpus_summary, execute_run, mission_seed
from .dataset import DATASET_COLUMNS, LabeledDataset, LabeledExample, Provenance, balance
from .labeling import Label, label
from .mutation import MutationKind, MutationOperator, Mutant, applications, count_applications, enumerate_mutants
from .store import Corpus, CorpusInfo, ManifestRecord, load_corpus

__all__ = [
    "Corpus",
    "CorpusInfo",
    "DATASET_COLUMNS",
    "Label",
    "LabeledDataset",
    "LabeledExample",
    "ManifestRecord",
    "MutationKind",
    "MutationOperator",
    "Mutant",
    "ORIGINAL_ID",
    "Provenance",
    "RunResult",
    "RunTask",
    "applications",
    "balance",
    "build_corpus",
    "corpus_summary",
    "count_applications",
    "enumerate_mutants",
    "execute_run",
    "label",
    "load_corpus",
    "mission_seed",
]
