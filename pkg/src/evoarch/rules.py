"""Declarative change rules: compose low-level deltas into named changes.

A rule is a conjunction of op templates sharing variables, with
inequality constraints, e.g.::

    rule value-update: delete-attribute(?s,?p,?o1) & add-attribute(?s,?p,?o2) & ?o1 != ?o2 => context(?s,?p)

Template arity follows the op: attribute ops bind (subject, predicate,
object), record ops bind (subject), schema ops bind (id, range).
Matching is greedy in sorted change order and each low-level change may
participate in at most one instance of a given rule.  The built-in
rules (value-update, record-replaced, property-retyped) are expressed
in the same grammar and always run before user rules.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .changes import (
    ChangeOp,
    ChangeSet,
    HighLevelChange,
    LowLevelChange,
    ATTRIBUTE_OPS,
    RECORD_OPS,
)
from .errors import RuleSyntaxError
from .identifiers import Identifier, classify_value
from .model import attribute_fact

__all__ = ["ChangeRule", "parse_rules", "BUILT_IN_RULES", "derive_high_level"]

_ARITY = {op: 3 for op in ATTRIBUTE_OPS}
_ARITY.update({op: 1 for op in RECORD_OPS})
_ARITY.update(
    {ChangeOp.ADD_SCHEMA_OBJECT: 2, ChangeOp.DELETE_SCHEMA_OBJECT: 2}
)

# Variable positions whose bindings are identifiers (usable in context()).
_IDENTIFIER_POSITIONS = {op: (0, 1) for op in ATTRIBUTE_OPS}
_IDENTIFIER_POSITIONS.update({op: (0,) for op in RECORD_OPS})
_IDENTIFIER_POSITIONS.update(
    {ChangeOp.ADD_SCHEMA_OBJECT: (0,), ChangeOp.DELETE_SCHEMA_OBJECT: (0,)}
)


@dataclass(frozen=True)
class _Atom:
    op: ChangeOp
    variables: tuple[str, ...]


@dataclass(frozen=True)
class ChangeRule:
    name: str
    atoms: tuple[_Atom, ...]
    constraints: tuple[tuple[str, str], ...]  # pairs that must bind unequal
    context_vars: tuple[str, ...]


_RULE_RE = re.compile(
    r"^rule\s+([A-Za-z][A-Za-z0-9_-]*)\s*:\s*(.+?)\s*=>\s*context\(\s*([^)]*?)\s*\)\s*$"
)
_ATOM_RE = re.compile(r"^([a-z-]+)\s*\(\s*([^)]*?)\s*\)$")
_CONSTRAINT_RE = re.compile(r"^\?([A-Za-z0-9_]+)\s*!=\s*\?([A-Za-z0-9_]+)$")
_VAR_RE = re.compile(r"^\?([A-Za-z0-9_]+)$")


def _parse_variables(raw: str, where: str) -> tuple[str, ...]:
    names = []
    for token in raw.split(","):
        token = token.strip()
        match = _VAR_RE.match(token)
        if not match:
            raise RuleSyntaxError(f"{where}: expected a ?variable, got {token!r}")
        names.append(match.group(1))
    return tuple(names)


def parse_rules(text: str) -> list[ChangeRule]:
    """Parse a ``.rules`` document; ``#`` starts a comment line."""
    rules = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        match = _RULE_RE.match(line)
        if not match:
            raise RuleSyntaxError(f"line {line_no}: not a rule definition: {line!r}")
        name, body, context_raw = match.groups()
        atoms: list[_Atom] = []
        constraints: list[tuple[str, str]] = []
        for part in body.split("&"):
            part = part.strip()
            constraint = _CONSTRAINT_RE.match(part)
            if constraint:
                constraints.append((constraint.group(1), constraint.group(2)))
                continue
            atom_match = _ATOM_RE.match(part)
            if not atom_match:
                raise RuleSyntaxError(f"line {line_no}: malformed atom {part!r}")
            op_name, vars_raw = atom_match.groups()
            try:
                op = ChangeOp(op_name)
            except ValueError:
                raise RuleSyntaxError(
                    f"line {line_no}: unknown op {op_name!r}"
                ) from None
            variables = _parse_variables(vars_raw, f"line {line_no}")
            if len(variables) != _ARITY[op]:
                raise RuleSyntaxError(
                    f"line {line_no}: {op.value} takes {_ARITY[op]} variables, "
                    f"got {len(variables)}"
                )
            atoms.append(_Atom(op, variables))
        if not atoms:
            raise RuleSyntaxError(f"line {line_no}: rule {name!r} has no atoms")

        bound = {
            (atom.op, position): variable
            for atom in atoms
            for position, variable in enumerate(atom.variables)
        }
        identifier_vars = {
            variable
            for (op, position), variable in bound.items()
            if position in _IDENTIFIER_POSITIONS[op]
        }
        all_vars = {v for atom in atoms for v in atom.variables}
        for left, right in constraints:
            for var in (left, right):
                if var not in all_vars:
                    raise RuleSyntaxError(
                        f"line {line_no}: constraint references unbound ?{var}"
                    )
        context_vars = _parse_variables(context_raw, f"line {line_no}")
        for var in context_vars:
            if var not in identifier_vars:
                raise RuleSyntaxError(
                    f"line {line_no}: context ?{var} is not bound in an "
                    "identifier position"
                )
        rules.append(ChangeRule(name, tuple(atoms), tuple(constraints), context_vars))
    return rules


BUILT_IN_RULES: tuple[ChangeRule, ...] = tuple(
    parse_rules(
        "rule value-update: delete-attribute(?s,?p,?o1) & add-attribute(?s,?p,?o2)"
        " & ?o1 != ?o2 => context(?s,?p)\n"
        "rule record-replaced: delete-record(?s) & add-record(?s) => context(?s)\n"
        "rule property-retyped: delete-schema-object(?i,?r1)"
        " & add-schema-object(?i,?r2) & ?r1 != ?r2 => context(?i)\n"
    )
)


def _binding_values(change: LowLevelChange) -> tuple[str, ...]:
    """The variable values a change offers, by template position."""
    if change.op in ATTRIBUTE_OPS:
        fact = attribute_fact(change.subject, change.payload)
        object_key = f"{fact.kind}\t{fact.lexical}\t{fact.datatype}"
        return (fact.subject, fact.predicate, object_key)
    if change.op in RECORD_OPS:
        return (change.payload.subject.canonical_value,)
    obj = change.payload
    if obj.range is None:
        range_spec = "-"
    elif isinstance(obj.range, Identifier):
        range_spec = f"class:{obj.range.canonical_value}"
    else:
        range_spec = f"datatype:{obj.range.value}"
    return (obj.id.canonical_value, range_spec)


def _find_instance(
    rule: ChangeRule,
    candidates: dict[ChangeOp, list[LowLevelChange]],
    used: set[LowLevelChange],
) -> tuple[tuple[LowLevelChange, ...], dict[str, str]] | None:
    """Lexicographically-first combination of unused changes matching the rule."""

    def constraints_hold(bindings: dict[str, str], final: bool) -> bool:
        for left, right in rule.constraints:
            if left in bindings and right in bindings:
                if bindings[left] == bindings[right]:
                    return False
            elif final:
                return False
        return True

    def extend(
        position: int,
        chosen: list[LowLevelChange],
        bindings: dict[str, str],
    ) -> tuple[tuple[LowLevelChange, ...], dict[str, str]] | None:
        if position == len(rule.atoms):
            if constraints_hold(bindings, final=True):
                return tuple(chosen), bindings
            return None
        atom = rule.atoms[position]
        for change in candidates.get(atom.op, ()):
            if change in used or change in chosen:
                continue
            values = _binding_values(change)
            new_bindings = dict(bindings)
            consistent = True
            for variable, value in zip(atom.variables, values):
                if new_bindings.get(variable, value) != value:
                    consistent = False
                    break
                new_bindings[variable] = value
            if not consistent or not constraints_hold(new_bindings, final=False):
                continue
            result = extend(position + 1, chosen + [change], new_bindings)
            if result is not None:
                return result
        return None

    return extend(0, [], {})


def _apply_rule(
    rule: ChangeRule, changes: tuple[LowLevelChange, ...]
) -> list[HighLevelChange]:
    candidates: dict[ChangeOp, list[LowLevelChange]] = {}
    for change in changes:  # already sorted by ChangeSet construction
        candidates.setdefault(change.op, []).append(change)
    used: set[LowLevelChange] = set()
    instances = []
    while True:
        found = _find_instance(rule, candidates, used)
        if found is None:
            break
        combo, bindings = found
        used.update(combo)
        context = tuple(classify_value(bindings[v]) for v in rule.context_vars)
        instances.append(HighLevelChange(rule.name, combo, context))
    return instances


def derive_high_level(
    cs: ChangeSet, rules: tuple[ChangeRule, ...] = ()
) -> ChangeSet:
    """Append rule-derived high-level changes (built-ins first)."""
    derived = list(cs.high_level)
    for rule in BUILT_IN_RULES + tuple(rules):
        derived.extend(_apply_rule(rule, cs.low_level))
    return cs.with_high_level(derived)
