"""Parsers for Aldebaran `.aut` automata and the `par using ... end par`
network description format.

An `.aut` file holds one labelled transition system:

    des (<initial>, <ntransitions>, <nstates>)
    (<src>, "<label>", <dst>)
    ...

Labels may omit the quotes when they contain no whitespace, comma or
parenthesis.  The network file lists synchronization rules and the process
files, e.g.::

    par using
        send * rec *  _  -> trans,
        send *  _  * rec -> trans
    in
        "producer.aut" || "consumer.aut" || "consumer.aut"
    end par

`--` starts a comment that runs to the end of the line (network files only).
"""

from __future__ import annotations

from dataclasses import dataclass

# Canonical name of the internal (invisible) action.  `.aut` files
# conventionally write "i"; "tau" is accepted and mapped to the same id.
INTERNAL_ACTION = "i"
_INTERNAL_ALIASES = ("i", "tau")

MAX_STATES = 1 << 20
MAX_LABELS = 1 << 16


class ParseError(ValueError):
    """Raised on malformed input; carries the 1-based source line."""

    def __init__(self, message, line=None, column=None):
        loc = ""
        if line is not None:
            loc = f"line {line}"
            if column is not None:
                loc += f", column {column}"
            loc += ": "
        super().__init__(loc + message)
        self.line = line
        self.column = column


@dataclass(frozen=True)
class Lts:
    """One process automaton with integer states and numbered labels."""

    num_states: int
    initial: int
    labels: tuple[str, ...]
    transitions: tuple[tuple[int, int, int], ...]  # (src, label_id, dst)

    def label_id(self, name: str) -> int | None:
        if name in _INTERNAL_ALIASES:
            name = INTERNAL_ACTION
        try:
            return self.labels.index(name)
        except ValueError:
            return None


@dataclass(frozen=True)
class RuleSpec:
    """A synchronization rule as written: one action name per process
    column (None for `_`) and a result action."""

    participants: tuple[str | None, ...]
    result: str

    @property
    def arity(self) -> int:
        return len(self.participants)


@dataclass(frozen=True)
class NetworkDescription:
    process_files: tuple[str, ...]
    rules: tuple[RuleSpec, ...]


def _canonical_label(name: str) -> str:
    return INTERNAL_ACTION if name in _INTERNAL_ALIASES else name


def parse_aut(text: str) -> Lts:
    """Parse `.aut` text into an :class:`Lts`.

    Label ids are assigned in first-appearance order; "i" and "tau" share
    one id named "i".
    """
    lines = text.splitlines()
    header_lineno = None
    for lineno, raw in enumerate(lines, start=1):
        if raw.strip():
            header_lineno = lineno
            break
    if header_lineno is None:
        raise ParseError("empty file, expected 'des (...)' header")

    header = lines[header_lineno - 1].strip()
    if not header.startswith("des"):
        raise ParseError(
            f"malformed header {header!r}, expected 'des (<initial>, <ntrans>, <nstates>)'",
            line=header_lineno,
        )
    try:
        fields = _split_triple(header[3:].strip(), header_lineno)
        initial, ntrans, nstates = (int(f) for f in fields)
    except ParseError:
        raise
    except ValueError:
        raise ParseError(f"malformed header {header!r}", line=header_lineno) from None

    if nstates < 1 or nstates > MAX_STATES:
        raise ParseError(
            f"state count {nstates} outside supported range 1..{MAX_STATES}",
            line=header_lineno,
        )
    if initial >= nstates:
        raise ParseError(
            f"initial state {initial} >= state count {nstates}", line=header_lineno
        )

    labels: list[str] = []
    label_ids: dict[str, int] = {}
    transitions: list[tuple[int, int, int]] = []

    for lineno in range(header_lineno + 1, len(lines) + 1):
        raw = lines[lineno - 1].strip()
        if not raw:
            continue
        src, label, dst = _parse_transition_line(raw, lineno)
        if src >= nstates or dst >= nstates:
            raise ParseError(
                f"state index {max(src, dst)} >= state count {nstates}", line=lineno
            )
        label = _canonical_label(label)
        lid = label_ids.get(label)
        if lid is None:
            lid = len(labels)
            if lid >= MAX_LABELS:
                raise ParseError(f"more than {MAX_LABELS} labels", line=lineno)
            label_ids[label] = lid
            labels.append(label)
        transitions.append((src, lid, dst))

    if len(transitions) != ntrans:
        raise ParseError(
            f"transition count mismatch: header says {ntrans}, found {len(transitions)}"
        )
    return Lts(
        num_states=nstates,
        initial=initial,
        labels=tuple(labels),
        transitions=tuple(transitions),
    )


def _split_triple(body: str, lineno: int) -> list[str]:
    if not (body.startswith("(") and body.endswith(")")):
        raise ParseError(f"malformed header body {body!r}", line=lineno)
    fields = [f.strip() for f in body[1:-1].split(",")]
    if len(fields) != 3:
        raise ParseError(
            f"expected 3 header fields, found {len(fields)}", line=lineno
        )
    return fields


def _parse_transition_line(raw: str, lineno: int) -> tuple[int, str, int]:
    if not (raw.startswith("(") and raw.endswith(")")):
        raise ParseError(f"malformed transition {raw!r}", line=lineno)
    body = raw[1:-1]
    head, _, rest = body.partition(",")
    mid, _, tail = rest.rpartition(",")
    if not mid:
        raise ParseError(f"malformed transition {raw!r}", line=lineno)
    try:
        src = int(head.strip())
        dst = int(tail.strip())
    except ValueError:
        raise ParseError(f"malformed transition {raw!r}", line=lineno) from None
    label = mid.strip()
    if len(label) >= 2 and label[0] == '"' and label[-1] == '"':
        label = label[1:-1]
    elif '"' in label or " " in label:
        raise ParseError(f"malformed label in {raw!r}", line=lineno)
    if not label:
        raise ParseError(f"empty label in {raw!r}", line=lineno)
    if src < 0 or dst < 0:
        raise ParseError(f"negative state index in {raw!r}", line=lineno)
    return src, label, dst


def unparse_aut(lts: Lts) -> str:
    """Render an :class:`Lts` back to `.aut` text (labels always quoted)."""
    out = [f"des ({lts.initial}, {len(lts.transitions)}, {lts.num_states})"]
    for src, lid, dst in lts.transitions:
        out.append(f'({src}, "{lts.labels[lid]}", {dst})')
    return "\n".join(out) + "\n"


# --- network description ----------------------------------------------------

_SYMBOLS = ("||", "->", "*", ",")
_KEYWORDS = ("par", "using", "in", "end")


def _tokenize_network(text: str):
    """Yield (token, line, column) with `--` comments stripped."""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("--", 1)[0]
        col = 0
        n = len(line)
        while col < n:
            ch = line[col]
            if ch.isspace():
                col += 1
                continue
            if ch == '"':
                end = line.find('"', col + 1)
                if end < 0:
                    raise ParseError("unterminated string", line=lineno, column=col + 1)
                yield line[col : end + 1], lineno, col + 1
                col = end + 1
                continue
            for sym in _SYMBOLS:
                if line.startswith(sym, col):
                    yield sym, lineno, col + 1
                    col += len(sym)
                    break
            else:
                end = col
                while end < n and not line[end].isspace() and line[end] not in '",*|' \
                        and not line.startswith("->", end):
                    end += 1
                if end == col:
                    raise ParseError(
                        f"unexpected character {ch!r}", line=lineno, column=col + 1
                    )
                yield line[col:end], lineno, col + 1
                col = end


class _TokenStream:
    def __init__(self, text):
        self._tokens = list(_tokenize_network(text))
        self._pos = 0

    def peek(self):
        return self._tokens[self._pos][0] if self._pos < len(self._tokens) else None

    def next(self, describe="more tokens"):
        if self._pos >= len(self._tokens):
            raise ParseError(f"unexpected end of input, expected {describe}")
        tok, line, col = self._tokens[self._pos]
        self._pos += 1
        return tok, line, col

    def expect(self, literal):
        tok, line, col = self.next(repr(literal))
        if tok != literal:
            raise ParseError(f"expected {literal!r}, found {tok!r}", line=line, column=col)

    def at_end(self):
        return self._pos >= len(self._tokens)


def parse_network(text: str) -> NetworkDescription:
    """Parse a network description into file paths and named rules.

    Grammar: ``par using <rule> (, <rule>)* in <file> (|| <file>)* end par``
    where ``<rule>`` is ``<item> (* <item>)* -> <result>`` and ``<item>`` is
    an action name or ``_``.  The rule list may be empty (pure interleaving).
    """
    ts = _TokenStream(text)
    ts.expect("par")
    ts.expect("using")

    rules: list[RuleSpec] = []
    while ts.peek() != "in":
        rules.append(_parse_rule(ts))
        if ts.peek() == ",":
            ts.expect(",")
        elif ts.peek() != "in":
            tok, line, col = ts.next()
            raise ParseError(f"expected ',' or 'in', found {tok!r}", line=line, column=col)

    ts.expect("in")
    files: list[str] = []
    while True:
        tok, line, col = ts.next("a process file")
        if tok in _KEYWORDS or tok in _SYMBOLS:
            raise ParseError(f"expected a process file, found {tok!r}", line=line, column=col)
        if tok.startswith('"'):
            tok = tok[1:-1]
        files.append(tok)
        if ts.peek() == "||":
            ts.expect("||")
        else:
            break
    ts.expect("end")
    ts.expect("par")
    if not ts.at_end():
        tok, line, col = ts.next()
        raise ParseError(f"trailing input {tok!r}", line=line, column=col)

    for rule in rules:
        if rule.arity != len(files):
            raise ParseError(
                f"rule arity {rule.arity} != {len(files)} processes"
            )
    return NetworkDescription(process_files=tuple(files), rules=tuple(rules))


def _parse_rule(ts: _TokenStream) -> RuleSpec:
    items: list[str | None] = []
    while True:
        tok, line, col = ts.next("an action name or '_'")
        if tok in _SYMBOLS or tok in _KEYWORDS or tok.startswith('"'):
            raise ParseError(f"expected an action name, found {tok!r}", line=line, column=col)
        items.append(None if tok == "_" else _canonical_label(tok))
        nxt = ts.peek()
        if nxt == "*":
            ts.expect("*")
        elif nxt == "->":
            break
        else:
            tok, line, col = ts.next()
            raise ParseError(f"expected '*' or '->', found {tok!r}", line=line, column=col)
    ts.expect("->")
    result, line, col = ts.next("a result action")
    if result in _SYMBOLS or result in _KEYWORDS or result == "_" or result.startswith('"'):
        raise ParseError(f"expected a result action, found {result!r}", line=line, column=col)
    return RuleSpec(participants=tuple(items), result=_canonical_label(result))
