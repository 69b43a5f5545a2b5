"""Desk-scale fusion kernel: prompts, embedders, toy encoder/decoder, losses."""
from .autograd import Tensor, parameter
from .gradcheck import OPS, grad_check, random_inputs
from .kernel import (FusionOutput, PromptPair, channel_split, cross_attention, feature_embed_1,
                     feature_embed_2, ffp, from_tokens, minimal_decoder, patch_embed,
                     run_pipeline, sfp, sfp_progressive, to_tokens, toy_encoder,
                     visualize_prompts)
from .losses import ce_loss, focal_loss
from .weights import KernelConfig, KernelWeights, init_weights, read_weights, write_weights

__all__ = [
    "Tensor", "parameter", "OPS", "grad_check", "random_inputs", "FusionOutput", "PromptPair",
    "channel_split", "cross_attention", "feature_embed_1", "feature_embed_2", "ffp",
    "from_tokens", "minimal_decoder", "patch_embed", "run_pipeline", "sfp", "sfp_progressive",
    "to_tokens", "toy_encoder", "visualize_prompts", "ce_loss", "focal_loss", "KernelConfig",
    "KernelWeights", "init_weights", "read_weights", "write_weights",
]
