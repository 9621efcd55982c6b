"""Concrete syntax: terms, and the declaration forms used in model files.

Term grammar (loosest to tightest): choice `+`, parallel `|`, the
postfix operators restriction `\\{a,b}` and relabelling `[b/a]`, then
prefixing `x.P`.  Atoms are `0`/`Nil`, identifiers, `rec X. P` and
parenthesised terms.  Labels are `tau`, `t`, `tick`, a name `a` or a
co-name `'a`.  A `rec` body may be a prefix chain (`rec X. a.X`); any
other operator in the body needs parentheses.

Newlines separate statements except inside brackets, where they are
ignored.  `#` starts a comment running to the end of the line.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ParseError
from .terms import (
    KEYWORDS,
    NIL,
    TAU,
    TICK,
    TIME,
    Choice,
    Label,
    Par,
    Prefix,
    Rec,
    Relabel,
    RESERVED_NAMES,
    Restrict,
    Term,
    Var,
    act,
)

@dataclass(frozen=True)
class Token:
    kind: str  # IDENT, INT, SYM, NEWLINE, EOF
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    line, col = 1, 1
    depth = 0
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if ch == "\n":
            if depth == 0:
                tokens.append(Token("NEWLINE", "\n", line, col))
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(Token("IDENT", text[i:j], line, col))
            col += j - i
            i = j
            continue
        if ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            tokens.append(Token("INT", text[i:j], line, col))
            col += j - i
            i = j
            continue
        if text.startswith("->", i):
            tokens.append(Token("SYM", "->", line, col))
            i += 2
            col += 2
            continue
        if ch in "({[":
            depth += 1
        elif ch in ")}]":
            depth = max(0, depth - 1)
        if ch in "=.+|\\{},[]/()';->":
            tokens.append(Token("SYM", ch, line, col))
            i += 1
            col += 1
            continue
        raise ParseError(f"unexpected character {ch!r}", line, col)
    tokens.append(Token("EOF", "", line, col))
    return tokens


class _Cursor:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self, ahead: int = 0) -> Token:
        j = min(self.pos + ahead, len(self.tokens) - 1)
        return self.tokens[j]

    def next(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "EOF":
            self.pos += 1
        return tok

    def at_sym(self, text: str) -> bool:
        tok = self.peek()
        return tok.kind == "SYM" and tok.text == text

    def eat_sym(self, text: str) -> bool:
        if self.at_sym(text):
            self.next()
            return True
        return False

    def expect_sym(self, text: str) -> Token:
        tok = self.next()
        if tok.kind != "SYM" or tok.text != text:
            raise ParseError(f"expected {text!r}, found {tok.text!r}", tok.line, tok.col)
        return tok

    def expect_ident(self, what: str = "identifier") -> Token:
        tok = self.next()
        if tok.kind != "IDENT":
            raise ParseError(f"expected {what}, found {tok.text!r}", tok.line, tok.col)
        return tok

    def skip_newlines(self) -> None:
        while self.peek().kind == "NEWLINE":
            self.next()


def _expect_name(cur: _Cursor, what: str) -> str:
    tok = cur.expect_ident(what)
    if tok.text in RESERVED_NAMES or tok.text in KEYWORDS:
        raise ParseError(f"reserved name {tok.text!r} cannot be used as {what}", tok.line, tok.col)
    return tok.text


# ---------------------------------------------------------------------------
# Terms


def _parse_label_token(cur: _Cursor) -> Label:
    tok = cur.peek()
    if tok.kind == "SYM" and tok.text == "'":
        cur.next()
        name = cur.expect_ident("action name")
        if name.text in RESERVED_NAMES:
            raise ParseError(f"{name.text!r} has no co-name", name.line, name.col)
        return act(name.text, output=True)
    if tok.kind == "IDENT":
        cur.next()
        if tok.text == "tau":
            return TAU
        if tok.text == "t":
            return TIME
        if tok.text == "tick":
            return TICK
        if tok.text in KEYWORDS:
            raise ParseError(f"keyword {tok.text!r} cannot be an action name", tok.line, tok.col)
        return act(tok.text)
    raise ParseError(f"expected label, found {tok.text!r}", tok.line, tok.col)


def _starts_prefix(cur: _Cursor) -> bool:
    tok = cur.peek()
    if tok.kind == "SYM" and tok.text == "'":
        return True
    if tok.kind == "IDENT":
        if tok.text in ("tau", "t", "tick"):
            return True
        if tok.text == "rec":
            return False
        nxt = cur.peek(1)
        return nxt.kind == "SYM" and nxt.text == "."
    return False


def _parse_atom(cur: _Cursor) -> Term:
    tok = cur.peek()
    if tok.kind == "INT" and tok.text == "0":
        cur.next()
        return NIL
    if tok.kind == "IDENT" and tok.text == "Nil":
        cur.next()
        return NIL
    if tok.kind == "IDENT" and tok.text == "rec":
        cur.next()
        var = _expect_name(cur, "recursion variable")
        cur.expect_sym(".")
        body = _parse_prefix(cur)
        return Rec(var, body)
    if tok.kind == "IDENT":
        if tok.text in RESERVED_NAMES:
            raise ParseError(f"reserved name {tok.text!r} is not a process", tok.line, tok.col)
        cur.next()
        return Var(tok.text)
    if tok.kind == "SYM" and tok.text == "(":
        cur.next()
        inner = _parse_choice(cur)
        cur.expect_sym(")")
        return inner
    raise ParseError(f"expected a process term, found {tok.text!r}", tok.line, tok.col)


def _parse_prefix(cur: _Cursor) -> Term:
    labels: list[Label] = []
    while _starts_prefix(cur):
        lab = _parse_label_token(cur)
        cur.expect_sym(".")
        labels.append(lab)
    body = _parse_atom(cur)
    for lab in reversed(labels):
        body = Prefix(lab, body)
    return body


def _parse_restrict_set(cur: _Cursor) -> frozenset[str]:
    cur.expect_sym("{")
    names: set[str] = set()
    if not cur.at_sym("}"):
        while True:
            names.add(_expect_name(cur, "restricted name"))
            if not cur.eat_sym(","):
                break
    cur.expect_sym("}")
    return frozenset(names)


def _parse_relabel_map(cur: _Cursor) -> tuple[tuple[str, str], ...]:
    pairs: list[tuple[str, str]] = []
    while True:
        new = _expect_name(cur, "relabelling target")
        cur.expect_sym("/")
        old = _expect_name(cur, "relabelling source")
        pairs.append((old, new))
        if not cur.eat_sym(","):
            break
    cur.expect_sym("]")
    olds = [old for old, _ in pairs]
    if len(olds) != len(set(olds)):
        tok = cur.peek()
        raise ParseError("duplicate relabelling source", tok.line, tok.col)
    return tuple(pairs)


def _parse_postfix(cur: _Cursor) -> Term:
    term = _parse_prefix(cur)
    while True:
        if cur.at_sym("\\"):
            cur.next()
            term = Restrict(term, _parse_restrict_set(cur))
        elif cur.at_sym("["):
            cur.next()
            term = Relabel(term, _parse_relabel_map(cur))
        else:
            return term


def _parse_par(cur: _Cursor) -> Term:
    parts = [_parse_postfix(cur)]
    while cur.eat_sym("|"):
        parts.append(_parse_postfix(cur))
    term = parts[-1]
    for part in reversed(parts[:-1]):
        term = Par(part, term)
    return term


def _parse_choice(cur: _Cursor) -> Term:
    parts = [_parse_par(cur)]
    while cur.eat_sym("+"):
        parts.append(_parse_par(cur))
    term = parts[-1]
    for part in reversed(parts[:-1]):
        term = Choice(part, term)
    return term


def parse_term(text: str) -> Term:
    """Parse a single term.  Raises ParseError with position on bad input.

    Newlines are plain whitespace here; they only separate statements in
    model files.
    """
    cur = _Cursor([tok for tok in tokenize(text) if tok.kind != "NEWLINE"])
    term = _parse_choice(cur)
    tok = cur.peek()
    if tok.kind != "EOF":
        raise ParseError(f"unexpected trailing input {tok.text!r}", tok.line, tok.col)
    return term


# ---------------------------------------------------------------------------
# Model-file declarations (syntax level; resolution happens in model.py)


@dataclass(frozen=True)
class ObserverRule:
    # subject None means the default clause; contains is an optional
    # window condition (m-orwellian observers only).
    subject: Label | None
    target: Label | None  # None means erase to the empty image
    identity: bool = False  # target is "whatever the letter was"
    contains: Label | None = None


@dataclass(frozen=True)
class ParsedObserver:
    name: str
    window: int
    rules: tuple[ObserverRule, ...]
    hides: frozenset[str] | None = None  # shorthand: erase these names, keep the rest


@dataclass(frozen=True)
class ParsedDfa:
    n_states: int
    initial: int
    accepting: frozenset[int]
    edges: tuple[tuple[int, Label, int], ...]
    default_self: bool
    default_target: int | None


@dataclass(frozen=True)
class ParsedPredicate:
    name: str
    kind: str  # "contains" | "dfa" | "test"
    contains_names: frozenset[str] | None = None
    dfa: ParsedDfa | None = None
    test_process: str | None = None


@dataclass(frozen=True)
class ParsedCheck:
    name: str
    kind: str  # "opacity" | "timing" | "synth" | "equiv"
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ParsedModel:
    definitions: tuple[tuple[str, Term], ...]
    observers: tuple[ParsedObserver, ...]
    predicates: tuple[ParsedPredicate, ...]
    checks: tuple[ParsedCheck, ...]


def _parse_observer_decl(cur: _Cursor) -> ParsedObserver:
    name = _expect_name(cur, "observer name")
    if cur.eat_sym("="):
        kw = cur.expect_ident("observer form")
        if kw.text != "hides":
            raise ParseError(f"unknown observer form {kw.text!r}", kw.line, kw.col)
        names = _parse_restrict_set(cur)
        return ParsedObserver(name, 1, (), hides=names)
    window = 1
    tok = cur.peek()
    if tok.kind == "IDENT" and tok.text == "window":
        cur.next()
        wtok = cur.next()
        if wtok.kind != "INT" or int(wtok.text) < 1:
            raise ParseError("window size must be a positive integer", wtok.line, wtok.col)
        window = int(wtok.text)
    cur.expect_sym("{")
    rules: list[ObserverRule] = []
    saw_default = False
    while not cur.at_sym("}"):
        cur.skip_newlines()
        if cur.at_sym("}"):
            break
        tok = cur.peek()
        if tok.kind == "IDENT" and tok.text == "default":
            cur.next()
            cur.expect_sym("->")
            tgt = cur.next()
            if tgt.kind == "IDENT" and tgt.text == "id":
                rules.append(ObserverRule(None, None, identity=True))
            elif tgt.kind == "IDENT" and tgt.text == "eps":
                rules.append(ObserverRule(None, None))
            else:
                raise ParseError("observer default must be 'id' or 'eps'", tgt.line, tgt.col)
            saw_default = True
        else:
            subject = _parse_label_token(cur)
            contains = None
            nxt = cur.peek()
            if nxt.kind == "IDENT" and nxt.text == "when":
                cur.next()
                kw = cur.expect_ident("window condition")
                if kw.text != "contains":
                    raise ParseError(f"unknown window condition {kw.text!r}", kw.line, kw.col)
                contains = _parse_label_token(cur)
            cur.expect_sym("->")
            tgt = cur.peek()
            if tgt.kind == "IDENT" and tgt.text == "eps":
                cur.next()
                rules.append(ObserverRule(subject, None, contains=contains))
            elif tgt.kind == "IDENT" and tgt.text == "id":
                cur.next()
                rules.append(ObserverRule(subject, None, identity=True, contains=contains))
            else:
                rules.append(ObserverRule(subject, _parse_label_token(cur), contains=contains))
        if not cur.eat_sym(";"):
            cur.skip_newlines()
    cur.expect_sym("}")
    if not saw_default:
        tok = cur.peek()
        raise ParseError(f"observer {name!r} needs a default clause", tok.line, tok.col)
    return ParsedObserver(name, window, tuple(rules))


def _parse_dfa_literal(cur: _Cursor) -> ParsedDfa:
    cur.expect_sym("{")
    n_states = None
    initial = 0
    accepting: set[int] = set()
    edges: list[tuple[int, Label, int]] = []
    default_self = False
    default_target: int | None = None
    while not cur.at_sym("}"):
        cur.skip_newlines()
        if cur.at_sym("}"):
            break
        tok = cur.peek()
        if tok.kind == "IDENT" and tok.text == "states":
            cur.next()
            n_states = int(cur.next().text)
        elif tok.kind == "IDENT" and tok.text == "initial":
            cur.next()
            initial = int(cur.next().text)
        elif tok.kind == "IDENT" and tok.text == "accept":
            cur.next()
            while cur.peek().kind == "INT":
                accepting.add(int(cur.next().text))
                if not cur.eat_sym(","):
                    break
        elif tok.kind == "IDENT" and tok.text == "default":
            cur.next()
            tgt = cur.next()
            if tgt.kind == "IDENT" and tgt.text == "self":
                default_self = True
            elif tgt.kind == "INT":
                default_target = int(tgt.text)
            else:
                raise ParseError("dfa default must be 'self' or a state", tgt.line, tgt.col)
        elif tok.kind == "INT":
            src = int(cur.next().text)
            cur.expect_sym("-")
            lab = _parse_label_token(cur)
            cur.expect_sym("->")
            dsttok = cur.next()
            if dsttok.kind != "INT":
                raise ParseError("dfa edge needs a target state", dsttok.line, dsttok.col)
            edges.append((src, lab, int(dsttok.text)))
        else:
            raise ParseError(f"unexpected token {tok.text!r} in dfa literal", tok.line, tok.col)
        if not cur.eat_sym(";"):
            cur.skip_newlines()
    cur.expect_sym("}")
    if n_states is None:
        tok = cur.peek()
        raise ParseError("dfa literal needs a 'states' clause", tok.line, tok.col)
    if not default_self and default_target is None:
        tok = cur.peek()
        raise ParseError("dfa literal needs a default clause", tok.line, tok.col)
    return ParsedDfa(n_states, initial, frozenset(accepting), tuple(edges), default_self, default_target)


def _parse_predicate_decl(cur: _Cursor) -> ParsedPredicate:
    name = _expect_name(cur, "predicate name")
    cur.expect_sym("=")
    kw = cur.expect_ident("predicate form")
    if kw.text == "contains":
        names = _parse_restrict_set(cur)
        return ParsedPredicate(name, "contains", contains_names=names)
    if kw.text == "dfa":
        return ParsedPredicate(name, "dfa", dfa=_parse_dfa_literal(cur))
    if kw.text == "test":
        proc = _expect_name(cur, "test process name")
        return ParsedPredicate(name, "test", test_process=proc)
    raise ParseError(f"unknown predicate form {kw.text!r}", kw.line, kw.col)


def _parse_check_decl(cur: _Cursor) -> ParsedCheck:
    name = _expect_name(cur, "check name")
    cur.expect_sym("=")
    kind = cur.expect_ident("check kind").text
    params: dict = {}
    if kind in ("opacity", "timing"):
        params["process"] = _expect_name(cur, "process name")
        _expect_keyword(cur, "observer")
        params["observer"] = _expect_name(cur, "observer name")
        _expect_keyword(cur, "predicate")
        params["predicate"] = _expect_name(cur, "predicate name")
    elif kind == "synth":
        params["process"] = _expect_name(cur, "process name")
        _expect_keyword(cur, "attacker")
        params["attacker"] = _expect_name(cur, "observer name")
        _expect_keyword(cur, "sup")
        params["sup_observer"] = _expect_name(cur, "observer name")
        _expect_keyword(cur, "predicate")
        params["predicate"] = _expect_name(cur, "predicate name")
        _expect_keyword(cur, "controllable")
        cur.expect_sym("{")
        controllable: list[str] = []
        if not cur.at_sym("}"):
            while True:
                if cur.eat_sym("'"):
                    controllable.append("'" + _expect_name(cur, "controllable action"))
                else:
                    controllable.append(_expect_name(cur, "controllable action"))
                if not cur.eat_sym(","):
                    break
        cur.expect_sym("}")
        params["controllable"] = tuple(controllable)
        tok = cur.peek()
        params["max_insert"] = 4
        if tok.kind == "IDENT" and tok.text == "insert":
            cur.next()
            itok = cur.next()
            if itok.kind != "INT":
                raise ParseError("insert budget must be an integer", itok.line, itok.col)
            params["max_insert"] = int(itok.text)
    elif kind == "equiv":
        sub = cur.expect_ident("equivalence kind").text
        if sub not in ("bisim", "wtrace"):
            tok = cur.peek()
            raise ParseError(f"unknown equivalence kind {sub!r}", tok.line, tok.col)
        params["kind"] = sub
        params["left"] = _expect_name(cur, "process name")
        params["right"] = _expect_name(cur, "process name")
    else:
        tok = cur.peek()
        raise ParseError(f"unknown check kind {kind!r}", tok.line, tok.col)
    return ParsedCheck(name, kind, params)


def _expect_keyword(cur: _Cursor, word: str) -> None:
    tok = cur.next()
    if tok.kind != "IDENT" or tok.text != word:
        raise ParseError(f"expected keyword {word!r}, found {tok.text!r}", tok.line, tok.col)


def parse_model_source(text: str) -> ParsedModel:
    """Parse a model file: definitions, observers, predicates, checks."""
    cur = _Cursor(tokenize(text))
    definitions: list[tuple[str, Term]] = []
    observers: list[ParsedObserver] = []
    predicates: list[ParsedPredicate] = []
    checks: list[ParsedCheck] = []
    while True:
        cur.skip_newlines()
        tok = cur.peek()
        if tok.kind == "EOF":
            break
        if tok.kind != "IDENT":
            raise ParseError(f"expected a declaration, found {tok.text!r}", tok.line, tok.col)
        if tok.text == "observer":
            cur.next()
            observers.append(_parse_observer_decl(cur))
        elif tok.text == "predicate":
            cur.next()
            predicates.append(_parse_predicate_decl(cur))
        elif tok.text == "check":
            cur.next()
            checks.append(_parse_check_decl(cur))
        else:
            name = _expect_name(cur, "process name")
            cur.expect_sym("=")
            definitions.append((name, _parse_choice(cur)))
        nxt = cur.peek()
        if nxt.kind not in ("NEWLINE", "EOF"):
            raise ParseError(f"unexpected trailing input {nxt.text!r}", nxt.line, nxt.col)
    return ParsedModel(tuple(definitions), tuple(observers), tuple(predicates), tuple(checks))


__all__ = [
    "parse_term",
    "parse_model_source",
    "ParsedModel",
    "ParsedObserver",
    "ParsedPredicate",
    "ParsedCheck",
    "ParsedDfa",
    "ObserverRule",
    "tokenize",
]
