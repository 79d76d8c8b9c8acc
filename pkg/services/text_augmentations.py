"""
Text augmentations over TextDoc

Syntactic transforms only: typos, look-alike characters, invisible and
bidirectional controls, styled alphabets, word merges/splits and table-driven
word swaps. A word is a maximal run of non-whitespace scalars.
"""

import logging
import re
from typing import Annotated, Any, Callable, Dict, List, Literal, Optional

from pydantic import Field

from models.media_models import TextDoc
from services import intensity_service as ix
from services.augmentation_core import resolve_callable
from services.catalog import Fraction, Positive, register
from utils.rng import Rng
from utils.text_tables import CharMapTable, load_table

logger = logging.getLogger(__name__)

ZERO_WIDTH_CHARS = ("​", "‌", "‍", "⁠")
RLO = "‮"
PDF = "‬"
TYPO_KINDS = ("substitute", "transpose", "delete", "insert")

Granularity = Literal["all", "word"]
TypoKind = Literal["substitute", "transpose", "delete", "insert"]
FunFontStyle = Literal["bold", "sans", "sans_bold", "monospace", "fullwidth", "circled", "random"]

WHITESPACE_SPLIT = re.compile(r"(\s+)")

# Styled alphabets: (capital A, small a, digit 0) code points; None = not covered
FUN_FONT_BLOCKS = {
    "bold": (0x1D400, 0x1D41A, 0x1D7CE),
    "sans": (0x1D5A0, 0x1D5BA, 0x1D7E2),
    "sans_bold": (0x1D5D4, 0x1D5EE, 0x1D7EC),
    "monospace": (0x1D670, 0x1D68A, 0x1D7F6),
    "circled": (0x24B6, 0x24D0, None),
}
CIRCLED_DIGITS = "⓪" + "".join(chr(0x2460 + i) for i in range(9))


# ==================== HELPERS ====================

def split_tokens(text: str) -> List[str]:
    """Alternating [whitespace?, word, whitespace, word, ...] pieces; joins back to text"""
    return [piece for piece in WHITESPACE_SPLIT.split(text) if piece]


def is_word(piece: str) -> bool:
    return not piece[0].isspace()


def match_case(source: str, replacement: str) -> str:
    """Copy the casing pattern of the first scalar (all-caps words stay all-caps)"""
    if len(source) > 1 and source.isupper():
        return replacement.upper()
    if source[:1].isupper():
        return replacement[:1].upper() + replacement[1:]
    return replacement


def fun_font_char(ch: str, style: str) -> str:
    if style == "fullwidth":
        return chr(ord(ch) + 0xFEE0) if "!" <= ch <= "~" else ch
    capital, small, digit = FUN_FONT_BLOCKS[style]
    if "A" <= ch <= "Z":
        return chr(capital + ord(ch) - ord("A"))
    if "a" <= ch <= "z":
        return chr(small + ord(ch) - ord("a"))
    if "0" <= ch <= "9":
        if digit is None:
            return CIRCLED_DIGITS[ord(ch) - ord("0")] if style == "circled" else ch
        return chr(digit + ord(ch) - ord("0"))
    return ch


def _table(default_id: str, table_path: Optional[str]) -> CharMapTable:
    return load_table(table_path or default_id)


def _word_regex(keys: List[str]) -> re.Pattern:
    alternatives = "|".join(re.escape(k) for k in sorted(keys, key=len, reverse=True))
    return re.compile(rf"(?<!\w)({alternatives})(?!\w)", re.IGNORECASE)


def _lookup_ignore_case(table: CharMapTable, word: str) -> Optional[str]:
    return table.first(word) or table.first(word.lower())


def _insert_between(text: str, granularity: str, cadence: float, pick: Callable[[], str]) -> str:
    """Insert pick() into every `cadence`-th gap between adjacent scalars (within words for "word")"""
    step = max(1, int(round(cadence)))
    out: List[str] = []
    gap = 0
    for index, ch in enumerate(text):
        if index > 0:
            prev = text[index - 1]
            inside = not (prev.isspace() or ch.isspace())
            if granularity == "all" or inside:
                if gap % step == 0:
                    out.append(pick())
                gap += 1
        out.append(ch)
    return "".join(out)


def insertion_density(params: Dict[str, Any]) -> float:
    return 100.0 / max(1, int(round(params["cadence"])))


def mapping_size(params: Dict[str, Any]) -> float:
    return 0.0 if not params["mapping"] else 100.0


# ==================== CHARACTER LEVEL ====================

def _typo(word: str, kind: str, keyboard: CharMapTable, rng: Rng) -> str:
    if kind == "transpose":
        i = int(rng.integers(0, len(word) - 1))
        return word[:i] + word[i + 1] + word[i] + word[i + 2:]
    if kind == "delete":
        i = int(rng.integers(0, len(word)))
        return word[:i] + word[i + 1:]
    if kind == "substitute":
        positions = [i for i, ch in enumerate(word) if ch.lower() in keyboard]
        i = positions[int(rng.integers(0, len(positions)))]
        neighbour = rng.choice(keyboard.get(word[i].lower()))
        return word[:i] + (neighbour.upper() if word[i].isupper() else neighbour) + word[i + 1:]
    i = int(rng.integers(0, len(word) + 1))
    anchor = word[min(i, len(word) - 1)]
    neighbours = keyboard.get(anchor.lower())
    inserted = rng.choice(neighbours) if neighbours else anchor
    return word[:i] + inserted + word[i:]


def feasible_typos(word: str, kinds: List[str], keyboard: CharMapTable) -> List[str]:
    """Typo kinds that can apply to this word; single-char words never get transpose/delete"""
    feasible = []
    for kind in kinds:
        if kind in ("transpose", "delete") and len(word) < 2:
            continue
        if kind == "substitute" and not any(ch.lower() in keyboard for ch in word):
            continue
        feasible.append(kind)
    return feasible


@register("text", "character", ix.probability("aug_word_p"))
def simulate_typos(doc: TextDoc, aug_word_p: Fraction = 0.3,
                   typo_kinds: Optional[List[TypoKind]] = None,
                   table_path: Optional[str] = None, rng: Rng = None) -> TextDoc:
    """
    Give each selected word exactly one typo

    The kind is drawn uniformly among the kinds feasible for that word, which
    is the same as re-drawing whenever an infeasible kind comes up.
    """
    rng = rng or Rng(0)
    keyboard = _table("keyboard_qwerty", table_path)
    kinds = list(dict.fromkeys(typo_kinds)) if typo_kinds else list(TYPO_KINDS)
    pieces = split_tokens(doc.content)
    for index, piece in enumerate(pieces):
        if not is_word(piece) or rng.random() >= aug_word_p:
            continue
        feasible = feasible_typos(piece, kinds, keyboard)
        if feasible:
            pieces[index] = _typo(piece, rng.choice(feasible), keyboard, rng)
    return TextDoc("".join(pieces))


def _replace_chars(doc: TextDoc, table: CharMapTable, aug_char_p: float, rng: Rng) -> TextDoc:
    out = []
    for ch in doc.content:
        alternatives = table.get(ch)
        if alternatives and rng.random() < aug_char_p:
            ch = rng.choice(alternatives)
        out.append(ch)
    return TextDoc("".join(out))


@register("text", "character", ix.probability("aug_char_p"))
def replace_similar_chars(doc: TextDoc, aug_char_p: Fraction = 0.3, table_path: Optional[str] = None,
                          rng: Rng = None) -> TextDoc:
    """Replace mappable chars with ASCII look-alikes (a -> @, o -> 0, ...)"""
    return _replace_chars(doc, _table("similar_chars", table_path), aug_char_p, rng or Rng(0))


@register("text", "character", ix.probability("aug_char_p"))
def replace_similar_unicode_chars(doc: TextDoc, aug_char_p: Fraction = 0.3, table_path: Optional[str] = None,
                                  rng: Rng = None) -> TextDoc:
    """Replace mappable chars with Unicode homoglyphs (Latin o -> Cyrillic o, ...)"""
    return _replace_chars(doc, _table("homoglyphs", table_path), aug_char_p, rng or Rng(0))


@register("text", "character", ix.probability("aug_p"))
def replace_fun_fonts(doc: TextDoc, style: FunFontStyle = "bold", aug_p: Fraction = 0.3,
                      rng: Rng = None) -> TextDoc:
    """Render selected words in a styled Unicode alphabet (mathematical bold, fullwidth, ...)"""
    rng = rng or Rng(0)
    styles = [s for s in FUN_FONT_BLOCKS] + ["fullwidth"]
    pieces = split_tokens(doc.content)
    for index, piece in enumerate(pieces):
        if not is_word(piece) or rng.random() >= aug_p:
            continue
        word_style = rng.choice(styles) if style == "random" else style
        pieces[index] = "".join(fun_font_char(ch, word_style) for ch in piece)
    return TextDoc("".join(pieces))


@register("text", "character", ix.constant(100))
def replace_upside_down(doc: TextDoc, granularity: Granularity = "all",
                        table_path: Optional[str] = None) -> TextDoc:
    """Flip glyphs with the pair table and reverse (whole text, or each word in place)"""
    table = _table("upside_down", table_path).symmetric()

    def flip(text: str) -> str:
        return "".join(table.first(ch, ch) for ch in reversed(text))

    if granularity == "all":
        return TextDoc(flip(doc.content))
    return TextDoc("".join(flip(p) if is_word(p) else p for p in split_tokens(doc.content)))


@register("text", "character", ix.constant(100))
def replace_bidirectional(doc: TextDoc) -> TextDoc:
    """RLO + reversed scalars + PDF: renders as the original, reads backwards"""
    return TextDoc(RLO + doc.content[::-1] + PDF)


@register("text", "character", insertion_density)
def insert_zero_width_chars(doc: TextDoc, granularity: Granularity = "all", cadence: Positive = 1.0,
                            rng: Rng = None) -> TextDoc:
    """Insert U+200B/200C/200D/2060 between scalars; stripping them restores the input"""
    rng = rng or Rng(0)
    return TextDoc(_insert_between(doc.content, granularity, cadence, lambda: rng.choice(ZERO_WIDTH_CHARS)))


@register("text", "character", insertion_density)
def insert_punctuation_chars(doc: TextDoc, granularity: Granularity = "all", cadence: Positive = 1.0,
                             vocab: Annotated[str, Field(min_length=1)] = ",.;:!?", rng: Rng = None) -> TextDoc:
    """Insert characters drawn from vocab between scalars"""
    rng = rng or Rng(0)
    return TextDoc(_insert_between(doc.content, granularity, cadence, lambda: rng.choice(vocab)))


@register("text", "character", insertion_density)
def insert_whitespace_chars(doc: TextDoc, granularity: Granularity = "all", cadence: Positive = 1.0,
                            vocab: Annotated[str, Field(min_length=1)] = " ", rng: Rng = None) -> TextDoc:
    """Insert whitespace characters drawn from vocab between scalars"""
    rng = rng or Rng(0)
    return TextDoc(_insert_between(doc.content, granularity, cadence, lambda: rng.choice(vocab)))


# ==================== WORD LEVEL ====================

@register("text", "word", ix.probability("aug_word_p"))
def merge_words(doc: TextDoc, aug_word_p: Fraction = 0.3, rng: Rng = None) -> TextDoc:
    """Delete the whitespace between two words with probability aug_word_p"""
    rng = rng or Rng(0)
    pieces = split_tokens(doc.content)
    out = []
    for index, piece in enumerate(pieces):
        between_words = not is_word(piece) and 0 < index < len(pieces) - 1
        if between_words and rng.random() < aug_word_p:
            continue
        out.append(piece)
    return TextDoc("".join(out))


@register("text", "word", ix.probability("aug_word_p"))
def split_words(doc: TextDoc, aug_word_p: Fraction = 0.3, rng: Rng = None) -> TextDoc:
    """Insert a space at a random interior position of selected words (length >= 2)"""
    rng = rng or Rng(0)
    pieces = split_tokens(doc.content)
    for index, piece in enumerate(pieces):
        if not is_word(piece) or len(piece) < 2 or rng.random() >= aug_word_p:
            continue
        cut = int(rng.integers(1, len(piece)))
        pieces[index] = piece[:cut] + " " + piece[cut:]
    return TextDoc("".join(pieces))


@register("text", "word", mapping_size)
def replace_words(doc: TextDoc, mapping: Optional[Dict[str, str]] = None, ignore_case: bool = True) -> TextDoc:
    """Whole-word replacements from a user mapping, single pass, case-preserving"""
    if not mapping:
        return TextDoc(doc.content)
    lookup = {k.lower(): v for k, v in mapping.items()} if ignore_case else dict(mapping)
    alternatives = "|".join(re.escape(k) for k in sorted(mapping, key=len, reverse=True))
    pattern = re.compile(rf"(?<!\w)({alternatives})(?!\w)", re.IGNORECASE if ignore_case else 0)

    def substitute(match: re.Match) -> str:
        word = match.group(0)
        if not ignore_case:
            return lookup[word]
        return match_case(word, lookup[word.lower()])

    return TextDoc(pattern.sub(substitute, doc.content))


@register("text", "word", ix.constant(100))
def swap_gendered_words(doc: TextDoc, table_path: Optional[str] = None) -> TextDoc:
    """Whole-word, case-preserving swaps from the gendered pair table (he <-> she, ...)"""
    table = _table("gendered_words", table_path)
    pattern = _word_regex(list(table.mapping))

    def substitute(match: re.Match) -> str:
        word = match.group(0)
        replacement = _lookup_ignore_case(table, word)
        return match_case(word, replacement) if replacement else word

    return TextDoc(pattern.sub(substitute, doc.content))


@register("text", "word", ix.probability("aug_p"))
def contractions(doc: TextDoc, direction: Literal["expand", "contract"] = "expand", aug_p: Fraction = 1.0,
                 table_path: Optional[str] = None, rng: Rng = None) -> TextDoc:
    """Expand contracted forms (don't -> do not) or contract expanded ones"""
    rng = rng or Rng(0)
    table = _table("contractions", table_path)
    if direction == "contract":
        table = table.inverse()
    pattern = _word_regex(list(table.mapping))

    def substitute(match: re.Match) -> str:
        phrase = match.group(0)
        if rng.random() >= aug_p:
            return phrase
        replacement = _lookup_ignore_case(table, phrase)
        return match_case(phrase, replacement) if replacement else phrase

    return TextDoc(pattern.sub(substitute, doc.content))


def _cased(word: str, case: str) -> str:
    if case == "upper":
        return word.upper()
    if case == "lower":
        return word.lower()
    return word[:1].upper() + word[1:].lower()


@register("text", "word", ix.probability("aug_p"))
def change_case(doc: TextDoc, case: Literal["upper", "lower", "title", "random"] = "lower",
                granularity: Granularity = "all", aug_p: Fraction = 1.0, rng: Rng = None) -> TextDoc:
    """
    Change letter case

    granularity "all" recases the whole text (random picks one case for it);
    "word" recases each word with probability aug_p, random picking per word.
    """
    rng = rng or Rng(0)
    cases = ("upper", "lower", "title")
    if granularity == "all":
        if rng.random() >= aug_p:
            return TextDoc(doc.content)
        chosen = rng.choice(cases) if case == "random" else case
        pieces = split_tokens(doc.content)
        return TextDoc("".join(_cased(p, chosen) if is_word(p) else p for p in pieces))
    pieces = split_tokens(doc.content)
    for index, piece in enumerate(pieces):
        if is_word(piece) and rng.random() < aug_p:
            pieces[index] = _cased(piece, rng.choice(cases) if case == "random" else case)
    return TextDoc("".join(pieces))


# ==================== UTILITY ====================

@register("text", "utility", ix.constant(0))
def get_baseline(doc: TextDoc) -> TextDoc:
    """Identity; gives benchmark and eval runs a no-op reference"""
    return TextDoc(doc.content)


@register("text", "utility", ix.constant(0))
def apply_lambda(doc: TextDoc, aug_function: Optional[Any] = None,
                 kwargs: Optional[Dict[str, Any]] = None) -> TextDoc:
    """Run a user callable (or "module:attr" path) on the text; str results are wrapped"""
    if aug_function is None:
        return TextDoc(doc.content)
    result = resolve_callable(aug_function)(doc, **(kwargs or {}))
    return result if isinstance(result, TextDoc) else TextDoc(str(result))
