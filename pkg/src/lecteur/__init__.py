"""French audiobook text-to-speech pipeline.

Subpackages:
    corpus     chapter segmentation, narration/dialogue spans, manifests
    frontend   text normalization, annotations, grapheme-to-phoneme
    context    cross-sentence features and the current-sentence vector
    acoustic   Conformer acoustic model with style and prosody modelling
    dsp        mel analysis, pitch, SSIM, resampling, alignments
    training   composite loss, Ranger optimizer, train/adapt loops
    vocoder    toy GAN vocoder and Griffin-Lim fallback
    cli        command-line pipeline driver
"""

__version__ = "0.1.0"
