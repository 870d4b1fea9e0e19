"""Synthetic language pair: invertible lexicon plus local reordering.

Each language has a closed word list; translation maps word i of one
lexicon to word i of the other (digits translate to themselves) and then
swaps adjacent word pairs, so sentence mapping is deterministic,
invertible, and non-identity. Every token owns a fixed audio motif of
discrete units: an onset unit followed by two "digit" units encoding the
token index, each held for 1-3 frames. Motifs never produce two equal
adjacent units, so duplicate-collapsed unit strings parse back to tokens
exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .rng import RngStream

SRC_WORDS = (
    "bo ka ri tu sen mal vi dor pas lun tek fi rem zu nal gep "
    "son dal mir quo vek las pom tir"
).split()

TGT_WORDS = (
    "ena kilo rua tema sol vira dun pesh lom tiv rek fano zem nul gor sil "
    "dama mik quen val lasu pin toro weji"
).split()


@dataclass(frozen=True)
class ToyLanguageSpec:
    src_words: tuple[str, ...] = tuple(SRC_WORDS)
    tgt_words: tuple[str, ...] = tuple(TGT_WORDS)
    src_lang: str = "kova"
    tgt_lang: str = "senu"
    digit_rate: float = 0.1
    digit_max: int = 30
    length_range: tuple[int, int] = (3, 8)
    k_units: int = 32

    def __post_init__(self):
        if len(self.src_words) != len(self.tgt_words):
            raise ValueError("lexicons must be parallel")
        if len(set(self.src_words)) != len(self.src_words) or len(set(self.tgt_words)) != len(self.tgt_words):
            raise ValueError("lexicon words must be unique")
        if not self.src_words:
            raise ValueError("empty vocab")
        if not (0.0 <= self.digit_rate <= 1.0):
            raise ValueError("digit_rate must lie in [0, 1]")

    @property
    def digits(self) -> list[str]:
        return [str(i) for i in range(self.digit_max + 1)]

    def tokens(self, lang: str) -> list[str]:
        """Full token inventory of one language: lexicon then digits."""
        words = self.src_words if lang == self.src_lang else self.tgt_words
        if lang not in (self.src_lang, self.tgt_lang):
            raise ValueError(f"unknown language {lang!r}")
        return list(words) + self.digits

    def lang_index(self, lang: str) -> int:
        return 0 if lang == self.src_lang else 1


def swap_adjacent(tokens: list[str]) -> list[str]:
    out = list(tokens)
    for i in range(0, len(out) - 1, 2):
        out[i], out[i + 1] = out[i + 1], out[i]
    return out


def translate(spec: ToyLanguageSpec, src_tokens: list[str]) -> list[str]:
    """Deterministic source -> target sentence mapping."""
    mapping = dict(zip(spec.src_words, spec.tgt_words))
    mapped = [mapping.get(t, t) for t in src_tokens]  # digits map to themselves
    return swap_adjacent(mapped)


def translate_back(spec: ToyLanguageSpec, tgt_tokens: list[str]) -> list[str]:
    mapping = dict(zip(spec.tgt_words, spec.src_words))
    return [mapping.get(t, t) for t in swap_adjacent(list(tgt_tokens))]


def sample_sentence(spec: ToyLanguageSpec, rng: RngStream) -> list[str]:
    lo, hi = spec.length_range
    n = lo + rng.integers(hi - lo + 1)
    out = []
    for _ in range(n):
        if rng.uniform() < spec.digit_rate:
            out.append(str(rng.integers(spec.digit_max + 1)))
        else:
            out.append(spec.src_words[rng.integers(len(spec.src_words))])
    return out


# -- audio motifs -----------------------------------------------------------

def motif_symbols(spec: ToyLanguageSpec, lang: str, token: str) -> list[int]:
    """The three-unit motif of a token: onset, high digit, low digit."""
    k = spec.k_units
    n_a = (k - 2) // 2
    n_b = k - 1 - n_a
    inventory = spec.tokens(lang)
    try:
        j = inventory.index(token)
    except ValueError:
        raise ValueError(f"token {token!r} not in {lang} inventory") from None
    j += spec.lang_index(lang) * (len(inventory) + 8)
    if j >= n_a * n_b:
        raise ValueError(f"motif capacity exceeded for K={k}")
    return [0, 1 + (j // n_b), 1 + n_a + (j % n_b)]


def motif_durations(spec: ToyLanguageSpec, lang: str, token: str) -> list[int]:
    inventory = spec.tokens(lang)
    j = inventory.index(token) + spec.lang_index(lang) * (len(inventory) + 8)
    return [1 + ((j * 7 + pos * 3) % 3) for pos in range(3)]


def sentence_to_raw_units(spec: ToyLanguageSpec, lang: str, tokens: list[str]) -> list[int]:
    """Framewise unit string of a sentence (symbols held for their durations)."""
    out: list[int] = []
    for tok in tokens:
        syms = motif_symbols(spec, lang, tok)
        durs = motif_durations(spec, lang, tok)
        for s, d in zip(syms, durs):
            out.extend([s] * d)
    return out


def sentence_to_reduced_units(spec: ToyLanguageSpec, lang: str, tokens: list[str]) -> list[int]:
    out: list[int] = []
    for tok in tokens:
        out.extend(motif_symbols(spec, lang, tok))
    return out


def tokens_from_reduced_units(spec: ToyLanguageSpec, lang: str, units: list[int]) -> list[str] | None:
    """Exact inverse of ``sentence_to_reduced_units``; None if unparseable."""
    inventory = spec.tokens(lang)
    by_motif = {
        tuple(motif_symbols(spec, lang, tok)[1:]): tok for tok in inventory
    }
    units = list(units)
    if len(units) % 3 != 0:
        return None
    tokens = []
    for i in range(0, len(units), 3):
        if units[i] != 0:
            return None
        tok = by_motif.get((units[i + 1], units[i + 2]))
        if tok is None:
            return None
        tokens.append(tok)
    return tokens


@dataclass
class TextVocab:
    """Token vocabulary of one toy language plus specials."""

    tokens: list[str]
    specials: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.tokens)
        if not self.specials:
            self.specials = {"pad": n, "bos": n + 1, "eos": n + 2, "blank": n + 3}
        self._index = {t: i for i, t in enumerate(self.tokens)}

    @property
    def size(self) -> int:
        return len(self.tokens) + len(self.specials)

    @property
    def pad(self) -> int:
        return self.specials["pad"]

    @property
    def bos(self) -> int:
        return self.specials["bos"]

    @property
    def eos(self) -> int:
        return self.specials["eos"]

    @property
    def blank(self) -> int:
        return self.specials["blank"]

    def encode(self, tokens: list[str]) -> list[int]:
        return [self._index[t] for t in tokens]

    def decode(self, ids) -> list[str]:
        inv = {v: k for k, v in self.specials.items()}
        out = []
        for i in ids:
            i = int(i)
            if i < len(self.tokens):
                out.append(self.tokens[i])
            elif i not in inv:
                raise ValueError(f"id {i} out of vocabulary")
        return out


def text_vocab(spec: ToyLanguageSpec, lang: str) -> TextVocab:
    return TextVocab(spec.tokens(lang))
