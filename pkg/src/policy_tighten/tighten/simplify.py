"""Body cleanup applied once per rule after tightening."""

from __future__ import annotations

from policy_tighten.cedar.ast import TRUE, Expr, Lit, conjoin, flatten_and
from policy_tighten.cedar.printer import expr_key


def _is_true(e: Expr) -> bool:
    return isinstance(e, Lit) and e.value is True


def simplify_body(e: Expr | None) -> Expr | None:
    """Flatten `&&`, drop `true` conjuncts and repeated conjuncts (first one wins).

    Conjunct order is kept, so a `has` guard still precedes the access it
    protects. A body that reduces to nothing becomes `true`.
    """
    if e is None:
        return None
    seen: set[str] = set()
    kept: list[Expr] = []
    for conj in flatten_and(e):
        if _is_true(conj):
            continue
        key = expr_key(conj)
        if key in seen:
            continue
        seen.add(key)
        kept.append(conj)
    if not kept:
        return TRUE
    return conjoin(kept)
