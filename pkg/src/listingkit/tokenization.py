"""Tokenizer shared by the text metrics and the toy embedder.

Rules (documented because several metrics depend on them):
  * Unicode whitespace separates tokens.
  * Punctuation characters are detached into single-character tokens
    (symbols like "+" are not punctuation and stay inside words, so
    capacity strings such as "6+64G" remain one token).
  * CJK ideographs (and kana/hangul) are always one token per character,
    so mixed-script listing text scores sensibly without a word segmenter.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass

_CJK_RANGES = (
    (0x2E80, 0x9FFF),    # radicals, CJK unified
    (0x3040, 0x30FF),    # kana (inside the range above, kept for clarity)
    (0xAC00, 0xD7AF),    # hangul syllables
    (0xF900, 0xFAFF),    # compatibility ideographs
    (0x20000, 0x2FA1F),  # extensions
)


def _is_cjk(ch: str) -> bool:
    cp = ord(ch)
    return any(lo <= cp <= hi for lo, hi in _CJK_RANGES)


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


@dataclass(frozen=True)
class TokenizerConfig:
    lowercase: bool = False
    detach_punctuation: bool = True


def tokenize(text: str, config: TokenizerConfig | None = None) -> list[str]:
    cfg = config or TokenizerConfig()
    if cfg.lowercase:
        text = text.casefold()
    tokens: list[str] = []
    word: list[str] = []

    def flush() -> None:
        if word:
            tokens.append("".join(word))
            word.clear()

    for ch in text:
        if ch.isspace():
            flush()
        elif _is_cjk(ch):
            flush()
            tokens.append(ch)
        elif cfg.detach_punctuation and _is_punct(ch):
            flush()
            tokens.append(ch)
        else:
            word.append(ch)
    flush()
    return tokens
