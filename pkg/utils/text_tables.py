"""Bundled character/word tables: UTF-8 TSV, `source<TAB>alt1,alt2,...`, '#' comments"""

import logging
from functools import lru_cache
from pathlib import Path
from typing import Dict, List, Optional, Union

from utils import config
from utils.errors import AssetError

logger = logging.getLogger(__name__)

BUNDLED_TABLES = (
    "homoglyphs",
    "similar_chars",
    "upside_down",
    "keyboard_qwerty",
    "gendered_words",
    "contractions",
)


class CharMapTable:
    """Immutable mapping of source string -> replacement alternatives"""

    def __init__(self, table_id: str, mapping: Dict[str, List[str]]):
        self.table_id = table_id
        self.mapping = mapping

    def __contains__(self, key: str) -> bool:
        return key in self.mapping

    def get(self, key: str) -> List[str]:
        return self.mapping.get(key, [])

    def first(self, key: str, default: Optional[str] = None) -> Optional[str]:
        alternatives = self.mapping.get(key)
        return alternatives[0] if alternatives else default

    def inverse(self) -> "CharMapTable":
        """Replacement -> source, keeping the first source seen for each replacement"""
        reverse: Dict[str, List[str]] = {}
        for source, alternatives in self.mapping.items():
            for alternative in alternatives:
                reverse.setdefault(alternative, [source])
        return CharMapTable(f"{self.table_id}.inverse", reverse)

    def symmetric(self) -> "CharMapTable":
        """Mapping plus its inverse; used for pair tables (upside-down glyphs)"""
        merged = {k: list(v) for k, v in self.mapping.items()}
        for replacement, sources in self.inverse().mapping.items():
            merged.setdefault(replacement, sources)
        return CharMapTable(f"{self.table_id}.symmetric", merged)

    def __len__(self) -> int:
        return len(self.mapping)


def parse_table(table_id: str, text: str) -> CharMapTable:
    mapping: Dict[str, List[str]] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip("\r\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2 or not parts[0]:
            raise AssetError(f"table {table_id} line {line_no}: expected 'source<TAB>alternatives'")
        alternatives = [alt for alt in parts[1].split(",") if alt]
        if not alternatives:
            raise AssetError(f"table {table_id} line {line_no}: no alternatives for {parts[0]!r}")
        mapping.setdefault(parts[0], [])
        mapping[parts[0]].extend(a for a in alternatives if a not in mapping[parts[0]])
    return CharMapTable(table_id, mapping)


@lru_cache(maxsize=64)
def _load_path(path: str) -> CharMapTable:
    file_path = Path(path)
    try:
        text = file_path.read_text(encoding="utf-8")
    except OSError as e:
        raise AssetError(f"cannot read table {file_path}: {e}") from None
    table = parse_table(file_path.stem, text)
    logger.info(f"Loaded table {file_path.stem} ({len(table)} entries)")
    return table


def load_table(table: Union[str, Path]) -> CharMapTable:
    """Load a bundled table by id or any TSV file by path"""
    if isinstance(table, str) and table in BUNDLED_TABLES:
        return _load_path(str(config.TEXT_TABLE_DIR / f"{table}.tsv"))
    return _load_path(str(Path(table)))
