"""Operations on protocol syntax trees.

Variables are compared by name. Substitution rejects capture instead of
repairing it, so callers that need it must ``alpha_rename`` first. Rebuilt
nodes keep the span and node id of the node they replace.
"""

from dataclasses import dataclass, replace
from itertools import count
from typing import FrozenSet, Iterator, List, Optional, Sequence, Set

from src.models.protocol import (
    Dispose,
    Equilibrate,
    Initial,
    Let,
    LetDispense,
    Mix,
    Observe,
    Protocol,
    SourceSpan,
    Var,
    children,
)
from src.utils.errors import CaptureError, FreshnessError, LinearityError


def binders(p: Protocol) -> Sequence[str]:
    """Names bound directly by ``p`` (not by its subterms)."""
    if isinstance(p, Let):
        return (p.name,)
    if isinstance(p, LetDispense):
        return (p.left,) if p.right is None else (p.left, p.right)
    return ()


def free_vars(p: Protocol) -> FrozenSet[str]:
    """Free sample variables of a protocol."""
    match p:
        case Var(name=name):
            return frozenset({name})
        case Initial():
            return frozenset()
        case Mix(left=left, right=right):
            return free_vars(left) | free_vars(right)
        case Let(name=name, bound=bound, body=body):
            return free_vars(bound) | (free_vars(body) - {name})
        case LetDispense(source=source, body=body):
            return free_vars(source) | (free_vars(body) - set(binders(p)))
        case Equilibrate(sample=s) | Dispose(sample=s) | Observe(sample=s):
            return free_vars(s)
    raise TypeError(f"not a protocol node: {type(p).__name__}")


def all_names(p: Protocol) -> Set[str]:
    """Every variable name occurring in ``p``, bound or free."""
    names = set(binders(p))
    if isinstance(p, Var):
        names.add(p.name)
    for child in children(p):
        names |= all_names(child)
    return names


def occurrences(p: Protocol, name: str) -> int:
    """Number of free occurrences of ``name`` in ``p``."""
    match p:
        case Var(name=n):
            return int(n == name)
        case Initial():
            return 0
        case Mix(left=left, right=right):
            return occurrences(left, name) + occurrences(right, name)
        case Let(bound=bound, body=body) | LetDispense(source=bound, body=body):
            inner = 0 if name in binders(p) else occurrences(body, name)
            return occurrences(bound, name) + inner
        case Equilibrate(sample=s) | Dispose(sample=s) | Observe(sample=s):
            return occurrences(s, name)
    raise TypeError(f"not a protocol node: {type(p).__name__}")


def substitute(p2: Protocol, x: str, p1: Protocol) -> Protocol:
    """Capture-avoiding substitution ``p2{x <- p1}``.

    Args:
        p2: Protocol to substitute into
        x: Variable to replace
        p1: Replacement protocol

    Returns:
        Protocol: ``p2`` with every free ``x`` replaced by ``p1``

    Raises:
        CaptureError: If a binder ``y != x`` of ``p2`` is free in ``p1``
    """
    replacement_fv = free_vars(p1)

    def go(p: Protocol) -> Protocol:
        match p:
            case Var(name=name):
                return p1 if name == x else p
            case Initial():
                return p
            case Mix(left=left, right=right):
                return replace(p, left=go(left), right=go(right))
            case Let(name=name, bound=bound, body=body):
                if name == x:
                    return replace(p, bound=go(bound))
                _check_capture(name, replacement_fv)
                return replace(p, bound=go(bound), body=go(body))
            case LetDispense(source=source, body=body):
                if x in binders(p):
                    return replace(p, source=go(source))
                for name in binders(p):
                    _check_capture(name, replacement_fv)
                return replace(p, source=go(source), body=go(body))
            case Equilibrate(sample=s) | Dispose(sample=s) | Observe(sample=s):
                return replace(p, sample=go(s))
        raise TypeError(f"not a protocol node: {type(p).__name__}")

    return go(p2)


def _check_capture(name: str, replacement_fv: FrozenSet[str]) -> None:
    if name in replacement_fv:
        raise CaptureError(
            f"substitution would capture free variable {name!r} under its binder; "
            f"rename the binder first"
        )


def _rename_free(p: Protocol, old: str, new: str) -> Protocol:
    """Rename free occurrences of ``old`` to ``new``, keeping node metadata.

    Raises:
        FreshnessError: If ``new`` is bound above a free occurrence of ``old``
    """
    match p:
        case Var(name=name):
            return replace(p, name=new) if name == old else p
        case Initial():
            return p
        case Mix(left=left, right=right):
            return replace(p, left=_rename_free(left, old, new), right=_rename_free(right, old, new))
        case Let(bound=bound, body=body) | LetDispense(source=bound, body=body):
            names = binders(p)
            if old not in names and new in names and old in free_vars(body):
                raise FreshnessError(f"name {new!r} is bound where {old!r} occurs free")
            if old not in names:
                body = _rename_free(body, old, new)
            if isinstance(p, Let):
                return replace(p, bound=_rename_free(bound, old, new), body=body)
            return replace(p, source=_rename_free(bound, old, new), body=body)
        case Equilibrate(sample=s) | Dispose(sample=s) | Observe(sample=s):
            return replace(p, sample=_rename_free(s, old, new))
    raise TypeError(f"not a protocol node: {type(p).__name__}")


def subterm(p: Protocol, path: Sequence[int]) -> Protocol:
    """Follow ``path`` (child positions, as in ``children``) from the root."""
    node = p
    for step in path:
        node = children(node)[step]
    return node


def _replace_at(p: Protocol, path: Sequence[int], new: Protocol) -> Protocol:
    if not path:
        return new
    step, rest = path[0], path[1:]
    kids = list(children(p))
    kids[step] = _replace_at(kids[step], rest, new)
    match p:
        case Mix():
            return replace(p, left=kids[0], right=kids[1])
        case Let():
            return replace(p, bound=kids[0], body=kids[1])
        case LetDispense():
            return replace(p, source=kids[0], body=kids[1])
        case Equilibrate() | Dispose() | Observe():
            return replace(p, sample=kids[0])
    raise ValueError("path leads below a leaf")


def alpha_rename(
    p: Protocol, binder_path: Sequence[int], fresh: str, position: int = 0
) -> Protocol:
    """Rename one binder and its bound occurrences.

    Args:
        p: Protocol containing the binder
        binder_path: Child positions from the root to the binding node
        fresh: New name
        position: Which name of a dispense binder to rename (0 left, 1 right)

    Returns:
        Protocol: An alpha-equivalent protocol

    Raises:
        FreshnessError: If ``fresh`` occurs free in the binder's body, clashes
            with the other dispense name, or would be captured inside the body
        ValueError: If the path does not lead to a binder
    """
    node = subterm(p, binder_path)
    names = binders(node)
    if not names or position >= len(names):
        raise ValueError(f"no binder at path {list(binder_path)} position {position}")
    old = names[position]
    if fresh == old:
        return p
    body = node.body
    if fresh in free_vars(body):
        raise FreshnessError(f"name {fresh!r} already occurs free in the binder's body")
    if fresh in names:
        raise FreshnessError(f"name {fresh!r} is already bound by the same dispense")
    new_body = _rename_free(body, old, fresh)
    if isinstance(node, Let):
        renamed = replace(node, name=fresh, body=new_body)
    elif position == 0:
        renamed = replace(node, left=fresh, body=new_body)
    else:
        renamed = replace(node, right=fresh, body=new_body)
    return _replace_at(p, binder_path, renamed)


@dataclass(frozen=True)
class LinearityViolation:
    """One failure of the single-use rule.

    Attributes:
        name: Offending variable
        count: Number of free occurrences in the binder's scope
        kind: ``"linearity"`` for a bound variable, ``"unbound"`` for a free
            variable of the whole protocol
        span: Binder (or first occurrence) location
    """

    name: str
    count: int
    kind: str = "linearity"
    span: Optional[SourceSpan] = None

    @property
    def message(self) -> str:
        if self.kind == "unbound":
            return f"variable {self.name!r} is not bound"
        if self.count == 0:
            return f"variable {self.name!r} is bound but never used"
        return f"variable {self.name!r} is used {self.count} times; samples must be used exactly once"


def _first_occurrence(p: Protocol, name: str) -> Optional[SourceSpan]:
    if isinstance(p, Var) and p.name == name:
        return p.span
    if name in binders(p):
        return _first_occurrence(p.bound if isinstance(p, Let) else p.source, name)
    for child in children(p):
        span = _first_occurrence(child, name)
        if span is not None:
            return span
    return None


def check_linear(p: Protocol) -> List[LinearityViolation]:
    """Check that every bound sample is used exactly once and nothing is free.

    Returns:
        List[LinearityViolation]: Empty iff the protocol is closed and linear
    """
    violations: List[LinearityViolation] = []

    def walk(node: Protocol) -> None:
        for name in binders(node):
            uses = occurrences(node.body, name)
            if uses != 1:
                violations.append(LinearityViolation(name, uses, "linearity", node.span))
        for child in children(node):
            walk(child)

    walk(p)
    for name in sorted(free_vars(p)):
        violations.append(
            LinearityViolation(name, occurrences(p, name), "unbound", _first_occurrence(p, name))
        )
    return violations


def require_linear(p: Protocol) -> None:
    """Raise ``LinearityError`` listing every violation of ``check_linear``."""
    violations = check_linear(p)
    if violations:
        raise LinearityError("; ".join(v.message for v in violations))


class _FreshNames:
    """Numbered names that avoid a fixed set; one counter for all prefixes."""

    def __init__(self, taken: Set[str]) -> None:
        self._taken = set(taken)
        self._counter = count()

    def __call__(self, base: str) -> str:
        while True:
            candidate = f"{base}{next(self._counter)}"
            if candidate not in self._taken:
                self._taken.add(candidate)
                return candidate


def desugar(p: Protocol) -> Protocol:
    """Expand ``let x,_ = Dispense(P1, p) in P2``.

    The discarded share is bound to a fresh hidden name and disposed of by
    mixing it into the surviving share:
    ``let x,y = Dispense(P1, p) in let x' = Mix(Dispose(y), x) in P2{x <- x'}``.
    Nested forms are expanded innermost first. A protocol without the
    discard form is returned unchanged.
    """
    fresh = _FreshNames(all_names(p))

    def go(node: Protocol) -> Protocol:
        match node:
            case Var() | Initial():
                return node
            case Mix(left=left, right=right):
                return replace(node, left=go(left), right=go(right))
            case Let(bound=bound, body=body):
                return replace(node, bound=go(bound), body=go(body))
            case LetDispense(left=x, right=None, source=source, body=body):
                source, body = go(source), go(body)
                hidden = fresh("y")
                survivor = fresh(x.rstrip("+-"))
                merged = Mix(Dispose(Var(hidden)), Var(x))
                return LetDispense(
                    x,
                    hidden,
                    source,
                    node.fraction,
                    Let(survivor, merged, _rename_free(body, x, survivor)),
                    span=node.span,
                    node_id=node.node_id,
                )
            case LetDispense(source=source, body=body):
                return replace(node, source=go(source), body=go(body))
            case Equilibrate(sample=s) | Dispose(sample=s) | Observe(sample=s):
                return replace(node, sample=go(s))
        raise TypeError(f"not a protocol node: {type(node).__name__}")

    return go(p)


def number_nodes(p: Protocol, start: int = 0) -> Protocol:
    """Assign node ids ``start, start+1, ...`` in pre-order."""
    ids = count(start)

    def go(node: Protocol) -> Protocol:
        node_id = next(ids)
        match node:
            case Var() | Initial():
                return replace(node, node_id=node_id)
            case Mix(left=left, right=right):
                left = go(left)
                return replace(node, node_id=node_id, left=left, right=go(right))
            case Let(bound=bound, body=body):
                bound = go(bound)
                return replace(node, node_id=node_id, bound=bound, body=go(body))
            case LetDispense(source=source, body=body):
                source = go(source)
                return replace(node, node_id=node_id, source=source, body=go(body))
            case Equilibrate(sample=s) | Dispose(sample=s) | Observe(sample=s):
                return replace(node, node_id=node_id, sample=go(s))
        raise TypeError(f"not a protocol node: {type(node).__name__}")

    return go(p)


def walk(p: Protocol) -> Iterator[Protocol]:
    """Nodes of ``p`` in pre-order."""
    yield p
    for child in children(p):
        yield from walk(child)


def is_numbered(p: Protocol) -> bool:
    return all(node.node_id is not None for node in walk(p))


def is_desugared(p: Protocol) -> bool:
    return not any(isinstance(n, LetDispense) and n.right is None for n in walk(p))
