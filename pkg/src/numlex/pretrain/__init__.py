"""Number pre-training: corpus, host encoder, masking, losses and the training loop."""

from numlex.pretrain.corpus import CorpusConfig, generate_corpus, serialize_row, serialize_table
from numlex.pretrain.host import HostConfig, HostModel, apply_plan, load_host, save_host
from numlex.pretrain.losses import (
    LossBreakdown,
    LossTerms,
    MomentumPair,
    alpha_schedule,
    distill_loss,
    distill_terms,
    mlm_loss,
    mlm_terms,
    momentum_update,
)
from numlex.pretrain.masking import Action, MaskEntry, MaskingPlan, NumTarget, VocabTarget, build_masking_plan, frame
from numlex.pretrain.trainer import (
    PretrainConfig,
    PretrainResult,
    RunMode,
    bootstrap_checkpoint,
    pretrain_run,
    prepare_corpus,
    smoothed,
)

__all__ = [
    "CorpusConfig", "generate_corpus", "serialize_row", "serialize_table", "HostConfig", "HostModel",
    "apply_plan", "load_host", "save_host", "LossBreakdown", "LossTerms", "MomentumPair", "alpha_schedule",
    "distill_loss", "distill_terms", "mlm_loss", "mlm_terms", "momentum_update", "Action", "MaskEntry",
    "MaskingPlan", "NumTarget", "VocabTarget", "build_masking_plan", "frame", "PretrainConfig",
    "PretrainResult", "RunMode", "bootstrap_checkpoint", "pretrain_run", "prepare_corpus", "smoothed",
]
