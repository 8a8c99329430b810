import logging
import unicodedata
from collections import Counter
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Tuple, Union

logger = logging.getLogger(__name__)

PAD_TOKEN, UNK_TOKEN, CLS_TOKEN = "[PAD]", "[UNK]", "[CLS]"
PAD_ID, UNK_ID, CLS_ID = 0, 1, 2
RESERVED: Tuple[str, ...] = (PAD_TOKEN, UNK_TOKEN, CLS_TOKEN)
CONTINUATION = "##"
MAX_WORD_LEN = 100


class Vocabulary:
    """
    Bijective token <-> id map with the reserved tokens at fixed ids.

    Ids are list positions: id 0 is [PAD], 1 is [UNK], 2 is [CLS]. Continuation
    pieces carry a "##" prefix. Instances are immutable once built.
    """

    def __init__(self, tokens: Sequence[str]):
        tokens = tuple(tokens)
        if tokens[: len(RESERVED)] != RESERVED:
            raise ValueError(
                f"Vocabulary must start with {list(RESERVED)}, got {list(tokens[:len(RESERVED)])}"
            )
        index: Dict[str, int] = {}
        for i, token in enumerate(tokens):
            if not token or any(ch.isspace() for ch in token):
                raise ValueError(f"Vocabulary token at id {i} is empty or contains whitespace")
            if token in index:
                raise ValueError(f"Duplicate vocabulary token {token!r} at ids {index[token]} and {i}")
            index[token] = i
        self._tokens = tokens
        self._index = index

    def __len__(self) -> int:
        return len(self._tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._index

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Vocabulary) and self._tokens == other._tokens

    def __hash__(self) -> int:
        return hash(self._tokens)

    @property
    def tokens(self) -> Tuple[str, ...]:
        return self._tokens

    def id_of(self, token: str) -> int:
        return self._index.get(token, UNK_ID)

    def token_of(self, token_id: int) -> str:
        if not 0 <= token_id < len(self._tokens):
            raise ValueError(f"Token id {token_id} outside vocabulary of size {len(self)}")
        return self._tokens[token_id]

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text("".join(f"{t}\n" for t in self._tokens), encoding="utf-8")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "Vocabulary":
        """Read a vocab file: one token per line, line number = id."""
        text = Path(path).read_text(encoding="utf-8")
        lines = text.split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        vocab = cls(lines)
        logger.debug(f"Loaded vocabulary of {len(vocab)} tokens from {path}")
        return vocab


def normalize(text: str) -> str:
    """Lowercase, turn every Unicode punctuation codepoint into a space, collapse whitespace."""
    stripped = "".join(
        " " if unicodedata.category(ch).startswith("P") else ch for ch in text.lower()
    )
    return " ".join(stripped.split())


def wordpiece(word: str, vocab: Vocabulary, max_word_len: int = MAX_WORD_LEN) -> List[int]:
    """
    Greedy longest-match-first subword split of one whitespace-free word.

    For example, with pieces {un, ##aff, ##able}, "unaffable" -> [un, ##aff, ##able].
    If some position has no match, or the word is longer than ``max_word_len``
    characters, the whole word maps to [UNK].
    """
    if len(word) > max_word_len:
        return [UNK_ID]
    pieces: List[int] = []
    start = 0
    while start < len(word):
        end = len(word)
        match = None
        while start < end:
            candidate = word[start:end]
            if start > 0:
                candidate = CONTINUATION + candidate
            if candidate in vocab:
                match = candidate
                break
            end -= 1
        if match is None:
            return [UNK_ID]
        pieces.append(vocab.id_of(match))
        start = end
    return pieces


def encode(text: str, vocab: Vocabulary, max_word_len: int = MAX_WORD_LEN) -> List[int]:
    """Normalize, split on whitespace and word-piece every word. No [CLS] is added."""
    ids: List[int] = []
    for word in normalize(text).split():
        ids.extend(wordpiece(word, vocab, max_word_len))
    return ids


def build_vocab(corpus: Iterable[str], target_size: int) -> Vocabulary:
    """
    Whole-word vocabulary from the most frequent normalized words.

    Args:
        corpus: Document texts
        target_size: Total size including the 3 reserved tokens

    Returns:
        Vocabulary with up to ``target_size - 3`` words, most frequent first, ties
        broken lexicographically

    Raises:
        ValueError: If target_size <= 3 or the corpus contains no words
    """
    if target_size <= len(RESERVED):
        raise ValueError(f"target_size must exceed {len(RESERVED)}, got {target_size}")
    counts: Counter = Counter()
    for text in corpus:
        counts.update(normalize(text).split())
    if not counts:
        raise ValueError("Cannot build a vocabulary from an empty corpus")
    ranked = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    words = [w for w, _ in ranked if w not in RESERVED][: target_size - len(RESERVED)]
    logger.info(
        f"Built vocabulary: {len(words)} words kept of {len(counts)} distinct "
        f"(target size {target_size})"
    )
    return Vocabulary(RESERVED + tuple(words))
