"""Text frontend: normalization, sentence handling, annotations, G2P."""

from .annotate import (
    AnnotationHeads,
    TokenAnnotation,
    default_annotations,
    multitask_loss,
    predict_annotations,
    read_conll,
    train_annotation_heads,
)
from .g2p import PhoneSequence, g2p, word_token_alignment
from .homographs import (
    FrontendState,
    HomographItem,
    eval_homographs,
    load_homograph_testset,
)
from .lexicon import (
    LIAISON_FINALS,
    PHONE_INVENTORY,
    SILENCE_PHONES,
    UD_TAGS,
    Lexicon,
    LexiconEntry,
    letter_to_sound,
    load_lexicon,
    save_lexicon,
)
from .normalize import normalize_text, spell_number, spell_ordinal
from .sentences import is_word_token, split_sentences, tokenize

__all__ = [
    "AnnotationHeads", "TokenAnnotation", "default_annotations",
    "multitask_loss", "predict_annotations", "read_conll",
    "train_annotation_heads", "PhoneSequence", "g2p", "word_token_alignment",
    "FrontendState", "HomographItem", "eval_homographs",
    "load_homograph_testset", "LIAISON_FINALS", "PHONE_INVENTORY",
    "SILENCE_PHONES", "UD_TAGS", "Lexicon", "LexiconEntry", "letter_to_sound",
    "load_lexicon", "save_lexicon", "normalize_text", "spell_number",
    "spell_ordinal", "is_word_token", "split_sentences", "tokenize",
]
