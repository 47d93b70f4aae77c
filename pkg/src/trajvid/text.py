"""Word-level tokenizer and per-track caption spans.

The vocabulary is the closed caption grammar of the synthetic scenes plus
pad/unk/sep specials. Captions are joined with a separator token into one
prompt; each track's span covers exactly its caption's tokens, so spans are
pairwise disjoint and separators belong to no span.
"""

from __future__ import annotations

from dataclasses import dataclass

PAD, UNK, SEP = 0, 1, 2
SEP_TOKEN = "<sep>"

_WORDS = (
    "the", "a",
    "red", "blue", "green", "orange", "purple", "cyan",
    "circle", "square", "triangle",
    "moving", "right", "left", "up", "down", "around",
    "staying", "still",
    "entering", "exiting", "crossing", "from", "to", "scene",
    "top", "bottom",
)

VOCAB: dict[str, int] = {"<pad>": PAD, "<unk>": UNK, SEP_TOKEN: SEP}
for _w in _WORDS:
    VOCAB[_w] = len(VOCAB)
VOCAB_SIZE = len(VOCAB)

MAX_TEXT_TOKENS = 64


@dataclass(frozen=True)
class CaptionSpan:
    track_id: str
    lo: int
    hi: int  # half-open [lo, hi)

    def __post_init__(self):
        if self.hi <= self.lo:
            raise ValueError(f"empty span for {self.track_id}")


def tokenize(text: str) -> list[int]:
    """Lowercased whitespace tokenization; unknown words map to <unk>."""
    return [VOCAB.get(word, UNK) for word in text.lower().split()]


def caption_spans(captions: dict[str, "Caption"] | list[tuple[str, str]],
                  max_tokens: int = MAX_TEXT_TOKENS,
                  ) -> tuple[list[int], list[CaptionSpan]]:
    """Join captions (ordered by track_id) into one prompt with spans.

    Accepts either {track_id: Caption} or [(track_id, text)] pairs; dict
    input is sorted by track_id so the layout is deterministic.
    """
    if isinstance(captions, dict):
        items = [(tid, captions[tid].text) for tid in sorted(captions)]
    else:
        items = [(tid, text) for tid, text in captions]

    tokens: list[int] = []
    spans: list[CaptionSpan] = []
    for idx, (tid, text) in enumerate(items):
        if idx > 0:
            tokens.append(SEP)
        ids = tokenize(text)
        if not ids:
            raise ValueError(f"caption for track {tid!r} produced no tokens")
        spans.append(CaptionSpan(tid, len(tokens), len(tokens) + len(ids)))
        tokens.extend(ids)
    if len(tokens) > max_tokens:
        raise ValueError(
            f"prompt needs {len(tokens)} tokens, budget is {max_tokens}")
    return tokens, spans
