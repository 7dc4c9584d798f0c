"""Node selectors over lattice indices, e.g. ``a==0 && b==0 || a==A && b==0``.

Grammar::

    expr  := conj ('||' conj)*
    conj  := cmp ('&&' cmp)*
    cmp   := term OP term          OP in == != < <= > >=
    term  := atom (('+'|'-') INT)?
    atom  := a | b | c | A | B | C | INT

Lower-case names are the node's lattice coordinates, upper-case names the
largest index along that axis.  The keyword ``none`` selects nothing.
"""

from __future__ import annotations

import operator
import re

import numpy as np

__all__ = ["Selector", "parse_selector"]

_TOKEN = re.compile(r"\s*(?:(\d+)|([abcABC])|(==|!=|<=|>=|<|>)|(&&|\|\|)|([+-]))")
_OPS = {
    "==": operator.eq,
    "!=": operator.ne,
    "<": operator.lt,
    "<=": operator.le,
    ">": operator.gt,
    ">=": operator.ge,
}
_AXES = {"a": 0, "b": 1, "c": 2}


def _tokenize(text):
    pos, out = 0, []
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ValueError(f"unexpected character {text[pos:].strip()[:1]!r} in selector {text!r}")
        kind = m.lastindex
        out.append((kind, m.group(kind)))
        pos = m.end()
    return out


class Selector:
    """Parsed selector; call with ``(index, counts)`` to get a node mask."""

    def __init__(self, text: str, clauses):
        self.text = text
        self._clauses = clauses  # list of lists of (lhs, op, rhs)

    def __repr__(self):
        return f"Selector({self.text!r})"

    def __eq__(self, other):
        return isinstance(other, Selector) and self.text == other.text

    def __hash__(self):
        return hash(self.text)

    @property
    def max_axis(self) -> int:
        """Highest axis referenced (0-based), or -1."""
        best = -1
        for conj in self._clauses:
            for lhs, _, rhs in conj:
                for atom, _ in (lhs, rhs):
                    if isinstance(atom, str):
                        best = max(best, _AXES[atom.lower()])
        return best

    def __call__(self, index, counts):
        index = np.asarray(index)
        if self.max_axis >= index.shape[1]:
            raise ValueError(f"selector {self.text!r} uses an axis the mesh does not have")

        def value(term):
            atom, shift = term
            if isinstance(atom, int):
                return atom + shift
            k = _AXES[atom.lower()]
            if atom.isupper():
                return counts[k] - 1 + shift
            return index[:, k] + shift

        mask = np.zeros(index.shape[0], dtype=bool)
        for conj in self._clauses:
            part = np.ones(index.shape[0], dtype=bool)
            for lhs, op, rhs in conj:
                part &= np.broadcast_to(_OPS[op](value(lhs), value(rhs)), part.shape)
            mask |= part
        return mask


def parse_selector(text: str) -> Selector:
    text = text.strip()
    if text in ("", "none"):
        return Selector("none", [])
    toks = _tokenize(text)
    pos = 0

    def peek():
        return toks[pos] if pos < len(toks) else (None, None)

    def term():
        nonlocal pos
        kind, val = peek()
        if kind == 1:
            atom = int(val)
        elif kind == 2:
            atom = val
        else:
            raise ValueError(f"expected index or number in selector {text!r}")
        pos += 1
        shift = 0
        kind, val = peek()
        if kind == 5:
            pos += 1
            k2, v2 = peek()
            if k2 != 1:
                raise ValueError(f"expected integer after {val!r} in selector {text!r}")
            pos += 1
            shift = int(v2) if val == "+" else -int(v2)
        return (atom, shift)

    clauses, conj = [], []
    while True:
        lhs = term()
        kind, op = peek()
        if kind != 3:
            raise ValueError(f"expected comparison in selector {text!r}")
        pos += 1
        rhs = term()
        conj.append((lhs, op, rhs))
        kind, val = peek()
        if kind is None:
            clauses.append(conj)
            break
        if kind != 4:
            raise ValueError(f"expected '&&' or '||' in selector {text!r}")
        pos += 1
        if val == "||":
            clauses.append(conj)
            conj = []
    # canonical spacing so equal selectors compare equal after a round trip
    canon = " || ".join(
        " && ".join(f"{_fmt(l)}{op}{_fmt(r)}" for l, op, r in c) for c in clauses
    )
    return Selector(canon, clauses)


def _fmt(term):
    atom, shift = term
    s = str(atom)
    if shift > 0:
        s += f"+{shift}"
    elif shift < 0:
        s += f"-{-shift}"
    return s
