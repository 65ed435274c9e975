"""Data handling, synthetic corpora, training drivers, evaluation and the CLI."""

from .config import RunConfig, load_config, save_config
from .data import CorpusError, DatasetRecord, ingest_jsonl, serialize_jsonl
from .pretrain import PretrainConfig, extraction_loss, match_rate, pretrain_extractor
from .synth import SyntheticCorpus, SyntheticSpec, gen_synthetic
from .system import EvalMode, MetricsReport, evaluate, summarize
