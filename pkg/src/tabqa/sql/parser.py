"""Tokenizer and recursive-descent parser for the SQL subset.

Grammar (keywords case-insensitive):

    query      := SELECT select_list FROM name
                  [WHERE or_cond] [GROUP BY columns] [ORDER BY order_list]
                  [LIMIT int] [';']
    select_list:= '*' | item (',' item)*
    item       := expr [AS ident]
    expr       := term (('+'|'-') term)*
    term       := factor (('*'|'/') factor)*
    factor     := '-' factor | primary
    primary    := number | string | aggregate | column | '(' expr ')'
    aggregate  := (COUNT|SUM|MIN|MAX|AVG) '(' ('*' | column) ')'
    or_cond    := and_cond (OR and_cond)*
    and_cond   := not_cond (AND not_cond)*
    not_cond   := NOT not_cond | predicate
    predicate  := '(' or_cond ')'
                | expr ( cmp expr | [NOT] LIKE string
                       | [NOT] IN '(' literal (',' literal)* ')'
                       | [NOT] BETWEEN expr AND expr )

Identifiers are bare or double-quoted; string literals are single- or
double-quoted (double-quoted tokens are disambiguated at bind time).
"""
from __future__ import annotations

import re
from dataclasses import dataclass

from .ast import (
    AGGREGATES,
    Aggregate,
    And,
    Arith,
    Between,
    ColumnRef,
    Comparison,
    Condition,
    Expr,
    InList,
    Like,
    Negate,
    Not,
    NumberLit,
    Or,
    OrderItem,
    QueryAst,
    SelectItem,
    Star,
    StringLit,
)

KEYWORDS = {
    "SELECT", "FROM", "WHERE", "AND", "OR", "NOT", "LIKE", "IN", "BETWEEN",
    "GROUP", "ORDER", "BY", "ASC", "DESC", "LIMIT", "AS",
    *AGGREGATES,
}


class ParseError(Exception):
    """Lexical or syntax error, with offset and the expected-token set."""

    def __init__(self, message: str, position: int, expected: tuple[str, ...] = ()):
        self.position = position
        self.expected = expected
        detail = f"{message} at offset {position}"
        if expected:
            detail += f" (expected one of: {', '.join(expected)})"
        super().__init__(detail)


@dataclass(frozen=True)
class Token:
    kind: str  # KEYWORD, IDENT, QIDENT, STRING, NUMBER, OP, EOF
    text: str
    pos: int


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>(?:\d+\.\d*|\.\d+|\d+))
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<qident>"(?:[^"]|"")*")
  | (?P<string>'(?:[^']|'')*')
  | (?P<op><=|>=|!=|<>|=|<|>|\+|-|\*|/|\(|\)|,|;)
    """,
    re.VERBOSE,
)


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        if m.lastgroup == "ws":
            pos = m.end()
            continue
        raw = m.group()
        if m.lastgroup == "number":
            tokens.append(Token("NUMBER", raw, pos))
        elif m.lastgroup == "ident":
            kind = "KEYWORD" if raw.upper() in KEYWORDS else "IDENT"
            tokens.append(Token(kind, raw, pos))
        elif m.lastgroup == "qident":
            tokens.append(Token("QIDENT", raw[1:-1].replace('""', '"'), pos))
        elif m.lastgroup == "string":
            tokens.append(Token("STRING", raw[1:-1].replace("''", "'"), pos))
        else:
            tokens.append(Token("OP", raw, pos))
        pos = m.end()
    tokens.append(Token("EOF", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = tokenize(text)
        self.i = 0

    def peek(self) -> Token:
        return self.tokens[self.i]

    def advance(self) -> Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def at_keyword(self, *words: str) -> bool:
        tok = self.peek()
        return tok.kind == "KEYWORD" and tok.text.upper() in words

    def expect_keyword(self, word: str) -> Token:
        if not self.at_keyword(word):
            raise ParseError(
                f"unexpected {self.peek().text!r}", self.peek().pos, (word,)
            )
        return self.advance()

    def at_op(self, *ops: str) -> bool:
        tok = self.peek()
        return tok.kind == "OP" and tok.text in ops

    def expect_op(self, op: str) -> Token:
        if not self.at_op(op):
            raise ParseError(
                f"unexpected {self.peek().text!r}", self.peek().pos, (op,)
            )
        return self.advance()

    # --- expressions ---

    def parse_expr(self) -> Expr:
        node = self.parse_term()
        while self.at_op("+", "-"):
            op = self.advance().text
            node = Arith(op, node, self.parse_term())
        return node

    def parse_term(self) -> Expr:
        node = self.parse_factor()
        while self.at_op("*", "/"):
            op = self.advance().text
            node = Arith(op, node, self.parse_factor())
        return node

    def parse_factor(self) -> Expr:
        if self.at_op("-"):
            self.advance()
            return Negate(self.parse_factor())
        return self.parse_primary()

    def parse_primary(self) -> Expr:
        tok = self.peek()
        if tok.kind == "NUMBER":
            self.advance()
            return NumberLit(float(tok.text), tok.text)
        if tok.kind == "STRING":
            self.advance()
            return StringLit(tok.text)
        if tok.kind == "QIDENT":
            self.advance()
            return ColumnRef(tok.text, quoted=True)
        if tok.kind == "KEYWORD" and tok.text.upper() in AGGREGATES:
            return self.parse_aggregate()
        if tok.kind == "IDENT":
            self.advance()
            return ColumnRef(tok.text)
        if self.at_op("("):
            self.advance()
            inner = self.parse_expr()
            self.expect_op(")")
            return inner
        raise ParseError(
            f"unexpected {tok.text!r}", tok.pos,
            ("number", "string", "column", "aggregate", "("),
        )

    def parse_aggregate(self) -> Aggregate:
        func = self.advance().text.upper()
        self.expect_op("(")
        if self.at_op("*"):
            star_tok = self.advance()
            if func != "COUNT":
                raise ParseError(f"{func} cannot take '*'", star_tok.pos, ("column",))
            arg: ColumnRef | Star = Star()
        else:
            tok = self.peek()
            if tok.kind == "QIDENT":
                self.advance()
                arg = ColumnRef(tok.text, quoted=True)
            elif tok.kind == "IDENT":
                self.advance()
                arg = ColumnRef(tok.text)
            else:
                raise ParseError(
                    f"unexpected {tok.text!r}", tok.pos, ("column", "*")
                )
        self.expect_op(")")
        return Aggregate(func, arg)

    # --- conditions ---

    def parse_or(self) -> Condition:
        parts = [self.parse_and()]
        while self.at_keyword("OR"):
            self.advance()
            parts.append(self.parse_and())
        return parts[0] if len(parts) == 1 else Or(tuple(parts))

    def parse_and(self) -> Condition:
        parts = [self.parse_not()]
        while self.at_keyword("AND"):
            self.advance()
            parts.append(self.parse_not())
        return parts[0] if len(parts) == 1 else And(tuple(parts))

    def parse_not(self) -> Condition:
        if self.at_keyword("NOT"):
            self.advance()
            return Not(self.parse_not())
        return self.parse_predicate()

    def parse_predicate(self) -> Condition:
        if self.at_op("("):
            # Either a grouped boolean or a parenthesized arithmetic operand;
            # try the boolean reading first and backtrack on failure.
            mark = self.i
            self.advance()
            try:
                inner = self.parse_or()
                self.expect_op(")")
                return inner
            except ParseError:
                self.i = mark
        left = self.parse_expr()
        negated = False
        if self.at_keyword("NOT"):
            self.advance()
            negated = True
            if not self.at_keyword("LIKE", "IN", "BETWEEN"):
                raise ParseError(
                    f"unexpected {self.peek().text!r}", self.peek().pos,
                    ("LIKE", "IN", "BETWEEN"),
                )
        if self.at_keyword("LIKE"):
            self.advance()
            tok = self.peek()
            if tok.kind not in ("STRING", "QIDENT"):
                raise ParseError(
                    f"unexpected {tok.text!r}", tok.pos, ("string pattern",)
                )
            self.advance()
            return Like(left, tok.text, negated)
        if self.at_keyword("IN"):
            self.advance()
            self.expect_op("(")
            items = [self.parse_literal()]
            while self.at_op(","):
                self.advance()
                items.append(self.parse_literal())
            self.expect_op(")")
            return InList(left, tuple(items), negated)
        if self.at_keyword("BETWEEN"):
            self.advance()
            low = self.parse_expr()
            self.expect_keyword("AND")
            high = self.parse_expr()
            return Between(left, low, high, negated)
        if negated:
            raise ParseError(
                f"unexpected {self.peek().text!r}", self.peek().pos,
                ("LIKE", "IN", "BETWEEN"),
            )
        tok = self.peek()
        op = None
        if tok.kind == "OP" and tok.text in ("=", "!=", "<>", "<", "<=", ">", ">="):
            op = "!=" if tok.text == "<>" else tok.text
            self.advance()
        if op is None:
            raise ParseError(
                f"unexpected {tok.text!r}", tok.pos,
                ("=", "!=", "<", "<=", ">", ">=", "LIKE", "IN", "BETWEEN"),
            )
        right = self.parse_expr()
        return Comparison(op, left, right)

    def parse_literal(self) -> Expr:
        if self.at_op("-"):
            self.advance()
            tok = self.peek()
            if tok.kind != "NUMBER":
                raise ParseError(f"unexpected {tok.text!r}", tok.pos, ("number",))
            self.advance()
            return NumberLit(-float(tok.text), f"-{tok.text}")
        tok = self.peek()
        if tok.kind == "NUMBER":
            self.advance()
            return NumberLit(float(tok.text), tok.text)
        if tok.kind in ("STRING", "QIDENT"):
            self.advance()
            return StringLit(tok.text)
        raise ParseError(f"unexpected {tok.text!r}", tok.pos, ("number", "string"))

    # --- statement ---

    def parse_query(self) -> QueryAst:
        self.expect_keyword("SELECT")
        items: list[SelectItem] = []
        if self.at_op("*"):
            self.advance()
            items.append(SelectItem(Star()))
        else:
            items.append(self.parse_select_item())
            while self.at_op(","):
                self.advance()
                items.append(self.parse_select_item())
        self.expect_keyword("FROM")
        tok = self.peek()
        if tok.kind not in ("IDENT", "QIDENT"):
            raise ParseError(f"unexpected {tok.text!r}", tok.pos, ("table name",))
        self.advance()
        table_name = tok.text

        where = None
        if self.at_keyword("WHERE"):
            self.advance()
            where = self.parse_or()

        group_by: list[ColumnRef] = []
        if self.at_keyword("GROUP"):
            self.advance()
            self.expect_keyword("BY")
            group_by.append(self.parse_group_column())
            while self.at_op(","):
                self.advance()
                group_by.append(self.parse_group_column())

        order_by: list[OrderItem] = []
        if self.at_keyword("ORDER"):
            self.advance()
            self.expect_keyword("BY")
            order_by.append(self.parse_order_item())
            while self.at_op(","):
                self.advance()
                order_by.append(self.parse_order_item())

        limit = None
        if self.at_keyword("LIMIT"):
            self.advance()
            tok = self.peek()
            if tok.kind != "NUMBER" or "." in tok.text:
                raise ParseError(f"unexpected {tok.text!r}", tok.pos, ("integer",))
            self.advance()
            limit = int(tok.text)

        if self.at_op(";"):
            self.advance()
        tok = self.peek()
        if tok.kind != "EOF":
            raise ParseError(f"unexpected {tok.text!r}", tok.pos, ("end of query",))
        return QueryAst(
            tuple(items), table_name, where, tuple(group_by), tuple(order_by), limit
        )

    def parse_select_item(self) -> SelectItem:
        expr = self.parse_expr()
        alias = None
        if self.at_keyword("AS"):
            self.advance()
            tok = self.peek()
            if tok.kind not in ("IDENT", "QIDENT"):
                raise ParseError(f"unexpected {tok.text!r}", tok.pos, ("alias",))
            self.advance()
            alias = tok.text
        return SelectItem(expr, alias)

    def parse_group_column(self) -> ColumnRef:
        tok = self.peek()
        if tok.kind == "QIDENT":
            self.advance()
            return ColumnRef(tok.text, quoted=True)
        if tok.kind == "IDENT":
            self.advance()
            return ColumnRef(tok.text)
        raise ParseError(f"unexpected {tok.text!r}", tok.pos, ("column",))

    def parse_order_item(self) -> OrderItem:
        expr = self.parse_expr()
        descending = False
        if self.at_keyword("ASC"):
            self.advance()
        elif self.at_keyword("DESC"):
            self.advance()
            descending = True
        return OrderItem(expr, descending)


def parse_query(text: str) -> QueryAst:
    """Parse one SQL statement of the supported subset into a QueryAst."""
    return _Parser(text).parse_query()
