from .extract import (STRIP_CHARS, clean_phrase, default_stopwords, extract_concepts, lexicon_chunks,
                      load_stopwords, normalize_text, tag_tokens, token_lemmas, tokenize)
from .lexicon import noun_lemma, verb_lemma
from .vocabulary import (ConceptProfile, ConceptVocabulary, build_vocabulary, extract_corpus,
                         profile_concepts, split_core_periphery)

__all__ = [
    "STRIP_CHARS", "ConceptProfile", "ConceptVocabulary", "build_vocabulary", "clean_phrase",
    "default_stopwords", "extract_concepts", "extract_corpus", "lexicon_chunks", "load_stopwords",
    "normalize_text", "noun_lemma", "profile_concepts", "split_core_periphery", "tag_tokens",
    "token_lemmas", "tokenize", "verb_lemma",
]
