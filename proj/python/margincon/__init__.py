"""Margin- and attention-based supervised contrastive losses.

Thin Python surface over the C++ core: loss kernels with analytic
gradients, class-aware attention scores, the two-task min-norm balancer,
the small normalizing encoder, synthetic speaker data and EER/minDCF
scoring.
"""

from ._margincon import (
    Encoder,
    __version__,
    aam_softmax_loss,
    alignment_uniformity,
    augment,
    caa_margin_con_loss,
    caa_scores,
    cos_plus_margin,
    cosine_similarity,
    eer,
    generate_dataset,
    make_trials,
    mgda_two_task,
    min_dcf,
    run_gradcheck,
    sup_margin_con_loss,
    supcon_loss,
)

__all__ = [
    "Encoder",
    "__version__",
    "aam_softmax_loss",
    "alignment_uniformity",
    "augment",
    "caa_margin_con_loss",
    "caa_scores",
    "cos_plus_margin",
    "cosine_similarity",
    "eer",
    "generate_dataset",
    "make_trials",
    "mgda_two_task",
    "min_dcf",
    "run_gradcheck",
    "sup_margin_con_loss",
    "supcon_loss",
]
