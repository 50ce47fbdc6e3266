"""AST corpus: tree types, label normalization, vocabulary, document I/O.

A corpus is a list of FileRecord entries, each tying a (project, version,
file_id) key and an optional defect label to one AST. Trees are immutable;
every traversal here is iterative so deeply nested inputs cannot overflow the
interpreter stack.

On disk a corpus is a JSON document::

    {"format_version": 1,
     "files": [{"file_id": ..., "project": ..., "version": ...,
                "label": 0 | 1 | null,
                "tree": {"label": ..., "children": [...]}}, ...]}

Documents produced by the `ingest` pipeline store normalized labels (literal
values already collapsed); `read_corpus` itself keeps whatever labels the
document contains.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterator

from . import jsonio
from .errors import DocumentError

UNK_TOKEN = "<unk>"

INT_LITERAL_LABEL = "IntegerLiteralExpr"
STRING_LITERAL_LABEL = "StringLiteralExpr"


@dataclass(frozen=True)
class AstTree:
    """One AST node; a leaf has an empty children tuple."""

    label: str
    children: tuple["AstTree", ...] = ()


@dataclass(frozen=True)
class EncodedTree:
    """AST node with its label replaced by a vocabulary index."""

    index: int
    children: tuple["EncodedTree", ...] = ()


@dataclass
class FileRecord:
    file_id: str
    project: str
    version: str
    label: int | None
    tree: AstTree

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.project, self.version, self.file_id)


def iter_nodes(tree: AstTree | EncodedTree) -> Iterator[Any]:
    """All nodes in preorder (parent before children, left to right)."""
    stack = [tree]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(node.children))


def node_count(tree: AstTree | EncodedTree) -> int:
    return sum(1 for _ in iter_nodes(tree))


def tree_depth(tree: AstTree | EncodedTree) -> int:
    """Depth in nodes along the longest root-to-leaf path (single node: 1)."""
    best = 0
    stack = [(tree, 1)]
    while stack:
        node, depth = stack.pop()
        if depth > best:
            best = depth
        for child in node.children:
            stack.append((child, depth + 1))
    return best


def normalize_label(label: str) -> str:
    """Collapse literal values: all-digit labels become IntegerLiteralExpr,
    double-quoted labels become StringLiteralExpr, anything else is kept."""
    if label.isascii() and label.isdigit():
        return INT_LITERAL_LABEL
    if len(label) >= 2 and label.startswith('"') and label.endswith('"'):
        return STRING_LITERAL_LABEL
    return label


def _rebuild(tree: Any, make_node) -> Any:
    """Post-order rebuild of a tree through `make_node(node, children)`."""
    out: list[Any] = []
    work: list[tuple[Any, bool]] = [(tree, False)]
    while work:
        node, expanded = work.pop()
        if not expanded:
            work.append((node, True))
            for child in reversed(node.children):
                work.append((child, False))
        else:
            k = len(node.children)
            children = tuple(out[len(out) - k:]) if k else ()
            if k:
                del out[len(out) - k:]
            out.append(make_node(node, children))
    return out[0]


def normalize_labels(tree: AstTree) -> AstTree:
    """Copy of `tree` with every label passed through normalize_label."""
    return _rebuild(tree, lambda node, ch: AstTree(normalize_label(node.label), ch))


@dataclass
class Vocabulary:
    """Token table with the unknown sentinel pinned at index 0."""

    tokens: tuple[str, ...]
    token_to_index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.tokens or self.tokens[0] != UNK_TOKEN:
            raise ValueError(f"vocabulary must start with {UNK_TOKEN!r}")
        if len(set(self.tokens)) != len(self.tokens):
            raise ValueError("vocabulary tokens must be unique")
        self.token_to_index = {t: i for i, t in enumerate(self.tokens)}

    @property
    def unk_index(self) -> int:
        return 0

    def __len__(self) -> int:
        return len(self.tokens)

    def index(self, token: str) -> int:
        """Index of `token`, or the unknown index when out of vocabulary."""
        return self.token_to_index.get(token, 0)

    def token(self, index: int) -> str:
        if not 0 <= index < len(self.tokens):
            raise IndexError(f"token index {index} out of range [0, {len(self.tokens)})")
        return self.tokens[index]


def build_vocabulary(trees: list[AstTree], size: int = 10000, min_count: int = 2) -> Vocabulary:
    """Most popular labels across `trees`, capped at `size` entries total.

    The cap includes the unknown sentinel, so at most size-1 corpus tokens are
    kept. Labels seen fewer than `min_count` times are dropped. Ordering is by
    descending count, then lexicographic, so the table is deterministic.
    """
    if size < 1:
        raise ValueError(f"vocabulary size must be >= 1, got {size}")
    if min_count < 1:
        raise ValueError(f"min_count must be >= 1, got {min_count}")
    counts: Counter[str] = Counter()
    for tree in trees:
        for node in iter_nodes(tree):
            counts[node.label] += 1
    counts.pop(UNK_TOKEN, None)  # sentinel is reserved, never a corpus token
    kept = [t for t, c in counts.items() if c >= min_count]
    kept.sort(key=lambda t: (-counts[t], t))
    return Vocabulary((UNK_TOKEN, *kept[: size - 1]))


def encode(tree: AstTree, vocab: Vocabulary) -> EncodedTree:
    """Tree with labels mapped to vocabulary indices (OOV to the unknown)."""
    to_index = vocab.token_to_index
    return _rebuild(tree, lambda node, ch: EncodedTree(to_index.get(node.label, 0), ch))


def decode(tree: EncodedTree, vocab: Vocabulary) -> AstTree:
    """Inverse of encode up to OOV collapse; indices must be in range."""
    tokens = vocab.tokens
    n = len(tokens)

    def make(node: EncodedTree, children: tuple[AstTree, ...]) -> AstTree:
        if not 0 <= node.index < n:
            raise IndexError(f"token index {node.index} out of range [0, {n})")
        return AstTree(tokens[node.index], children)

    return _rebuild(tree, make)


def tree_to_json(tree: AstTree) -> dict:
    return _rebuild(tree, lambda node, ch: {"label": node.label, "children": list(ch)})


def tree_from_json(obj: Any, path: str = "tree") -> AstTree:
    """Validate and convert a JSON object into an AstTree.

    Errors name the offending location as a JSON path, e.g.
    ``files[3].tree.children[0]``.
    """
    out: list[AstTree] = []
    work: list[tuple[Any, str, bool]] = [(obj, path, False)]
    while work:
        node, where, expanded = work.pop()
        if not expanded:
            if not isinstance(node, dict):
                raise DocumentError(f"{where}: node must be an object, got {type(node).__name__}")
            unknown = set(node) - {"label", "children"}
            if unknown:
                raise DocumentError(f"{where}: unknown field {sorted(unknown)[0]!r}")
            label = node.get("label")
            if not isinstance(label, str) or not label:
                raise DocumentError(f"{where}: 'label' must be a non-empty string")
            children = node.get("children")
            if not isinstance(children, list):
                raise DocumentError(f"{where}: 'children' must be a list")
            work.append((node, where, True))
            for i in range(len(children) - 1, -1, -1):
                work.append((children[i], f"{where}.children[{i}]", False))
        else:
            k = len(node["children"])
            children_nodes = tuple(out[len(out) - k:]) if k else ()
            if k:
                del out[len(out) - k:]
            out.append(AstTree(node["label"], children_nodes))
    return out[0]


def corpus_to_document(records: list[FileRecord]) -> dict:
    return {
        "format_version": 1,
        "files": [
            {
                "file_id": r.file_id,
                "project": r.project,
                "version": r.version,
                "label": r.label,
                "tree": tree_to_json(r.tree),
            }
            for r in records
        ],
    }


def corpus_from_document(doc: Any, source: str = "corpus") -> list[FileRecord]:
    if not isinstance(doc, dict):
        raise DocumentError(f"{source}: document must be an object")
    if doc.get("format_version") != 1:
        raise DocumentError(f"{source}: format_version must be 1, got {doc.get('format_version')!r}")
    unknown = set(doc) - {"format_version", "files"}
    if unknown:
        raise DocumentError(f"{source}: unknown field {sorted(unknown)[0]!r}")
    files = doc.get("files")
    if not isinstance(files, list):
        raise DocumentError(f"{source}: 'files' must be a list")
    records: list[FileRecord] = []
    seen: set[tuple[str, str, str]] = set()
    for i, entry in enumerate(files):
        where = f"files[{i}]"
        if not isinstance(entry, dict):
            raise DocumentError(f"{where}: entry must be an object")
        unknown = set(entry) - {"file_id", "project", "version", "label", "tree"}
        if unknown:
            raise DocumentError(f"{where}: unknown field {sorted(unknown)[0]!r}")
        for key in ("file_id", "project", "version"):
            value = entry.get(key)
            if not isinstance(value, str) or not value:
                raise DocumentError(f"{where}: {key!r} must be a non-empty string")
        label = entry.get("label")
        if label is not None and (isinstance(label, bool) or label not in (0, 1)):
            raise DocumentError(f"{where}: 'label' must be 0, 1 or null, got {label!r}")
        if "tree" not in entry:
            raise DocumentError(f"{where}: missing field 'tree'")
        tree = tree_from_json(entry["tree"], f"{where}.tree")
        record = FileRecord(entry["file_id"], entry["project"], entry["version"],
                            None if label is None else int(label), tree)
        if record.key in seen:
            raise DocumentError(f"{where}: duplicate entry for {record.key}")
        seen.add(record.key)
        records.append(record)
    return records


def write_corpus(path: str | Path, records: list[FileRecord]) -> None:
    jsonio.write(path, corpus_to_document(records))


def read_corpus(path: str | Path) -> list[FileRecord]:
    return corpus_from_document(jsonio.read(path), str(path))


def cell(records: list[FileRecord], project: str, version: str) -> list[FileRecord]:
    """Records belonging to one (project, version) cell, in corpus order."""
    return [r for r in records if r.project == project and r.version == version]
