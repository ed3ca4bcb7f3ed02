"""Static analysis of Android packages with MI-ranked naive-Bayes scoring.

Pipeline: open_archive -> run_detectors -> tally/rank_and_select ->
train/classify -> evaluate_cv.  See the CLI (`droidsift --help`) for the
batch workflow and README for file formats.
"""

from . import errors
from .bayes import BayesModel, Verdict, classify, load_model, posterior, save_model, train
from .container import (ApkArchive, ArchiveEntry, EntryKind, list_payload_entries,
                        open_archive, read_entry)
from .corpus import (CorpusManifest, CorpusRecord, MarginalSpec, ProfileStore,
                     default_marginals, extract_corpus, load_corpus_manifest,
                     load_marginals, load_store, save_store, synth_generate)
from .detect import (AppProfile, FeatureCatalog, FeatureDef, FeatureKind, Label,
                     default_catalog, dump_catalog, inspect_archive, load_catalog,
                     run_detectors)
from .dexparse import DexIndex, MatchMode, contains_pattern, parse_dex
from .evaluate import (ConfusionCounts, EvalReport, confusion, evaluate_cv,
                       kfold_split, metrics, roc_auc, roc_points)
from .manifest import ManifestInfo, parse_manifest
from .rank import Cells, FeatureCounts, RankedFeature, mutual_information, rank_and_select, tally

__version__ = "0.1.0"

__all__ = [
    "errors",
    "ApkArchive", "ArchiveEntry", "EntryKind", "open_archive", "read_entry",
    "list_payload_entries",
    "DexIndex", "MatchMode", "parse_dex", "contains_pattern",
    "ManifestInfo", "parse_manifest",
    "AppProfile", "FeatureCatalog", "FeatureDef", "FeatureKind", "Label",
    "default_catalog", "dump_catalog", "load_catalog", "run_detectors",
    "inspect_archive",
    "Cells", "FeatureCounts", "RankedFeature", "tally", "mutual_information",
    "rank_and_select",
    "BayesModel", "Verdict", "train", "posterior", "classify", "save_model",
    "load_model",
    "ConfusionCounts", "EvalReport", "confusion", "metrics", "roc_auc",
    "roc_points", "kfold_split", "evaluate_cv",
    "CorpusManifest", "CorpusRecord", "MarginalSpec", "ProfileStore",
    "default_marginals", "load_marginals", "load_corpus_manifest",
    "extract_corpus", "synth_generate", "save_store", "load_store",
]
