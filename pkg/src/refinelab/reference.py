"""Reference values observed in large-scale runs with hosted models.

These numbers come from full-size experiments that require specific
hosted translation/refinement models and a hosted judge.  They are
recorded here for orientation when reading reports, and are explicitly
NOT reproduction targets for this package's test suite: desk runs use
the deterministic mock backends, whose absolute scores are meaningless.
"""

# Length-normalized log-likelihood deltas (refined minus initial) of a
# strong open-weights refiner judging its own edits, by refinement
# granularity and step: {setting: {step: (delta_conditioned, delta_unconditioned)}}.
LIKELIHOOD_DELTA_REFERENCE = {
    "doc_chunk->segment": {
        "s1": (-0.151, 0.041),
        "s2": (-0.164, 0.051),
        "s3": (-0.175, 0.055),
        "s4": (-0.175, 0.057),
    },
    "doc_chunk->paragraph": {
        "s1": (-0.051, 0.035),
        "s2": (-0.055, 0.037),
        "s3": (-0.057, 0.038),
        "s4": (-0.057, 0.039),
    },
    "doc_chunk->doc_chunk": {
        "s1": (-0.001, 0.004),
        "s2": (-0.001, 0.002),
        "s3": (-0.001, 0.007),
        "s4": (-0.001, 0.007),
    },
}

# Average ROC AUC of initial-translation confidence proxies at predicting
# which words a refiner will modify (chance = 0.5): log-probability and
# entropy proxies respectively, pooled over seven language pairs.
CONFIDENCE_EDIT_AUC_REFERENCE = {"logprob": 0.503, "entropy": 0.504}

# Quality scores (0-100 judge scale) for translator/refiner strength
# swaps after four refinement steps: strong and weak model combinations.
STRENGTH_SWAP_REFERENCE = {
    "strong_initial": 85.7,
    "strong->strong_s4": 89.3,
    "weak_initial": 64.8,
    "weak->weak_s4": 67.6,
    "strong->weak_s4": 77.5,
    "weak->strong_s4": 88.9,
}
