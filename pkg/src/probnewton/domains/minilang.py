"""Per-domain mini-languages for data actions and conditions.

Action and condition ids are opaque strings at the IR level; each domain
parses the fragments it understands here.  Token streams are whitespace
tolerant: `x:=x+1`, `x := x + 1` and `x   :=x +1` are the same action.
"""

from __future__ import annotations

import re
from fractions import Fraction

_TOKEN = re.compile(r"\s*([A-Za-z_][A-Za-z_0-9]*|\d+\.\d+|\d+|:=|<=|>=|==|!=|\|\||&&|.)")


def tokens(text: str) -> list:
    out = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            break
        tok = m.group(1)
        if tok.strip():
            out.append(tok)
        pos = m.end()
    return out


def join_tokens(toks: list) -> str:
    """Canonical spelling: single spaces, tight parentheses and commas."""
    out = ""
    for t in toks:
        if not out:
            out = t
        elif t in (")", ","):
            out += t
        elif out.endswith("("):
            out += t
        else:
            out += " " + t
    return out


def parse_number(tok: str) -> Fraction:
    return Fraction(tok)


class MiniLangError(ValueError):
    pass


# ---------------------------------------------------------------------------
# boolean expressions (Bayes domain):  phi := x | true | false | !phi
#                                           | phi & phi | phi '|' phi | (phi)
# ---------------------------------------------------------------------------

def parse_bool(text: str):
    """Parse to a closure state_dict -> bool; also returns the variables used."""
    toks = tokens(text)
    pos = 0
    names: set = set()

    def peek():
        return toks[pos] if pos < len(toks) else None

    def take():
        nonlocal pos
        tok = peek()
        if tok is None:
            raise MiniLangError(f"unexpected end of condition {text!r}")
        pos += 1
        return tok

    def atom():
        tok = take()
        if tok == "(":
            e = or_expr()
            if take() != ")":
                raise MiniLangError(f"missing ')' in {text!r}")
            return e
        if tok in ("!", "not", "¬"):
            e = atom()
            return lambda s: not e(s)
        if tok == "true":
            return lambda s: True
        if tok == "false":
            return lambda s: False
        if re.fullmatch(r"[A-Za-z_][A-Za-z_0-9]*", tok):
            names.add(tok)
            return lambda s, v=tok: bool(s[v])
        raise MiniLangError(f"bad token {tok!r} in condition {text!r}")

    def and_expr():
        e = atom()
        while peek() in ("&", "&&", "and", "∧"):
            take()
            rhs = atom()
            e = (lambda a, b: lambda s: a(s) and b(s))(e, rhs)
        return e

    def or_expr():
        e = and_expr()
        while peek() in ("|", "||", "or", "∨"):
            take()
            rhs = and_expr()
            e = (lambda a, b: lambda s: a(s) or b(s))(e, rhs)
        return e

    fn = or_expr()
    if pos != len(toks):
        raise MiniLangError(f"trailing tokens in condition {text!r}")
    return fn, frozenset(names)


# ---------------------------------------------------------------------------
# affine expressions over program variables:  c0 + c1*x1 - x2 + ...
# ---------------------------------------------------------------------------

def parse_affine(text: str) -> tuple:
    """Returns (constant: Fraction, coeffs: dict var -> Fraction)."""
    toks = tokens(text)
    pos = 0
    const = Fraction(0)
    coeffs: dict = {}

    def peek():
        return toks[pos] if pos < len(toks) else None

    def take():
        nonlocal pos
        tok = peek()
        if tok is None:
            raise MiniLangError(f"unexpected end of expression {text!r}")
        pos += 1
        return tok

    def number() -> Fraction:
        tok = take()
        val = parse_number(tok)
        if peek() == "/":
            take()
            val /= parse_number(take())
        return val

    def term(sign: Fraction):
        nonlocal const
        tok = peek()
        if tok is None:
            raise MiniLangError(f"dangling operator in {text!r}")
        if re.fullmatch(r"\d+(\.\d+)?", tok):
            val = number()
            if peek() == "*":
                take()
                name = take()
                if not re.fullmatch(r"[A-Za-z_][A-Za-z_0-9]*", name):
                    raise MiniLangError(f"expected a variable after '*' in {text!r}")
                coeffs[name] = coeffs.get(name, Fraction(0)) + sign * val
            else:
                const += sign * val
        elif re.fullmatch(r"[A-Za-z_][A-Za-z_0-9]*", tok):
            take()
            coeffs[tok] = coeffs.get(tok, Fraction(0)) + sign
        else:
            raise MiniLangError(f"bad token {tok!r} in expression {text!r}")

    sign = Fraction(1)
    if peek() == "-":
        take()
        sign = Fraction(-1)
    elif peek() == "+":
        take()
    term(sign)
    while peek() in ("+", "-"):
        sign = Fraction(1) if take() == "+" else Fraction(-1)
        term(sign)
    if pos != len(toks):
        raise MiniLangError(f"trailing tokens in expression {text!r}")
    return const, coeffs


# ---------------------------------------------------------------------------
# action classification helpers
# ---------------------------------------------------------------------------

_ASSIGN = re.compile(r"^\s*([A-Za-z_][A-Za-z_0-9]*)\s*:=\s*(.*)$")
_SAMPLE = re.compile(r"^\s*([A-Za-z_][A-Za-z_0-9]*)\s*~\s*([A-Za-z_][A-Za-z_0-9]*)\s*\(\s*(.*?)\s*\)\s*$")
_CALLFORM = re.compile(r"^\s*([A-Za-z_][A-Za-z_0-9]*)\s*\(\s*(.*?)\s*\)\s*$")


def split_assign(action: str):
    m = _ASSIGN.match(action)
    if not m:
        return None
    return m.group(1), m.group(2)


def split_sample(action: str):
    m = _SAMPLE.match(action)
    if not m:
        return None
    args = [a.strip() for a in m.group(3).split(",")] if m.group(3).strip() else []
    return m.group(1), m.group(2), args


def split_callform(action: str):
    """reward(3)-style opaque statements."""
    m = _CALLFORM.match(action)
    if not m:
        return None
    args = [a.strip() for a in m.group(2).split(",")] if m.group(2).strip() else []
    return m.group(1), args


def number_of(text: str) -> Fraction:
    toks = tokens(text)
    if len(toks) == 1:
        return parse_number(toks[0])
    if len(toks) == 3 and toks[1] == "/":
        return parse_number(toks[0]) / parse_number(toks[2])
    if len(toks) == 2 and toks[0] == "-":
        return -parse_number(toks[1])
    if len(toks) == 4 and toks[0] == "-" and toks[2] == "/":
        return -parse_number(toks[1]) / parse_number(toks[3])
    raise MiniLangError(f"expected a number, found {text!r}")


def distribution_mean(dist: str, args: list) -> Fraction:
    """Mean of a constant-parameter sampling distribution."""
    if dist == "Ber" and len(args) == 1:
        return number_of(args[0])
    if dist == "Unif" and len(args) == 2:
        return (number_of(args[0]) + number_of(args[1])) / 2
    if dist in ("Normal", "Norm", "Gauss") and len(args) >= 1:
        return number_of(args[0])
    if dist == "Det" and len(args) == 1:
        return number_of(args[0])
    raise MiniLangError(f"unknown distribution {dist}({', '.join(args)})")
