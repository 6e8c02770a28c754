"""Loading `.kb` files and resolving child knowledge-base references.

A control-level knowledge base may link each of its patterns to a
pattern-level knowledge base via a file reference (`child "file.kb"`),
resolved relative to the referencing file. The catalog owns the loaded
set and the parent/child wiring so sessions can descend a stage without
touching the filesystem.
"""

from __future__ import annotations

from pathlib import Path
from typing import Optional

from .errors import ConfigError, InvalidKnowledgeBaseError, UnknownReferenceError
from .dsl import parse_kb
from .model import KBLevel, KnowledgeBase

__all__ = ["KBCatalog", "load_kb_file"]


def load_kb_file(path: Path | str) -> KnowledgeBase:
    """Parse one `.kb` file (children are not followed)."""
    path = Path(path)
    return parse_kb(path.read_text(encoding="utf-8"), str(path))


class KBCatalog:
    """A set of knowledge bases addressable by id, with child links."""

    def __init__(self):
        self._kbs: dict[str, KnowledgeBase] = {}
        self._children: dict[tuple[str, str], str] = {}  # (kb id, pattern id) -> child kb id
        self._by_path: dict[Path, str] = {}

    def add(self, kb: KnowledgeBase) -> None:
        existing = self._kbs.get(kb.id)
        if existing is not None and existing != kb:
            raise ConfigError(f"two different knowledge bases share the id '{kb.id}'")
        self._kbs[kb.id] = kb

    def link_child(self, parent_id: str, pattern_id: str, child_id: str) -> None:
        self._children[(parent_id, pattern_id)] = child_id

    def ids(self) -> list[str]:
        return list(self._kbs)

    def get(self, kb_id: str) -> KnowledgeBase:
        kb = self._kbs.get(kb_id)
        if kb is None:
            raise UnknownReferenceError(f"unknown knowledge base '{kb_id}'")
        return kb

    def child_kb(self, kb_id: str, pattern_id: str) -> Optional[KnowledgeBase]:
        child_id = self._children.get((kb_id, pattern_id))
        return self._kbs[child_id] if child_id is not None else None

    # -- file loading -------------------------------------------------------

    @classmethod
    def from_dir(cls, directory: Path | str) -> "KBCatalog":
        """Load every top-level `.kb` file in a directory, following child links."""
        directory = Path(directory)
        if not directory.is_dir():
            raise ConfigError(f"knowledge base directory '{directory}' is not readable")
        catalog = cls()
        for path in sorted(directory.glob("*.kb")):
            catalog.load_file(path)
        return catalog

    @classmethod
    def from_file(cls, path: Path | str) -> "KBCatalog":
        catalog = cls()
        catalog.load_file(path)
        return catalog

    def load_file(self, path: Path | str) -> KnowledgeBase:
        """Load a `.kb` file plus, recursively, the child files it references."""
        path = Path(path).resolve()
        known = self._by_path.get(path)
        if known is not None:
            return self._kbs[known]
        kb = load_kb_file(path)
        self.add(kb)
        self._by_path[path] = kb.id
        for pattern in kb.patterns:
            if pattern.child_ref is None:
                continue
            child_path = (path.parent / pattern.child_ref).resolve()
            if not child_path.is_file():
                raise ConfigError(
                    f"{path}: pattern '{pattern.id}' references missing child file '{pattern.child_ref}'"
                )
            child = self.load_file(child_path)
            if child.level is not KBLevel.PATTERN:
                raise InvalidKnowledgeBaseError(
                    f"{child_path}: child of pattern '{pattern.id}' must be a pattern-level knowledge base"
                )
            self.link_child(kb.id, pattern.id, child.id)
        return kb
