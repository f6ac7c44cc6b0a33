"""Expression parser for the documented infix grammar.

    expression := term (("+" | "-") term)*
    term       := unary (("*" | "/") unary)*
    unary      := ("+" | "-")* power
    power      := atom ("^" unary)?            # right associative
    atom       := NUMBER | NAME | NAME "(" expression ("," expression)* ")"
                | "(" expression ")"
    NUMBER     := digits with an optional fractional part (exact rational)
    NAME       := [A-Za-z_][A-Za-z0-9_]* "'"*   # jet symbols D_r, primes G'

There is no implicit multiplication.  In strict mode every NAME must already
be declared in the symbol table; otherwise new names register as parameters
(or as arbitrary functions when applied).  Errors carry the byte offset.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .kernel import (
    Add, ArityError, Call, Expr, Mul, MINUS_ONE, Pow, Rat, Sym, SymbolTable,
    UndeclaredSymbolError, normalize,
)


class ParseError(Exception):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte {offset})")
        self.offset = offset


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    offset: int


def _tokenize(text: str):
    tokens = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch.isdigit() or (ch == "." and i + 1 < n and text[i + 1].isdigit()):
            j = i
            while j < n and text[j].isdigit():
                j += 1
            if j < n and text[j] == ".":
                j += 1
                while j < n and text[j].isdigit():
                    j += 1
            tokens.append(_Token("number", text[i:j], i))
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            while j < n and text[j] == "'":
                j += 1
            tokens.append(_Token("name", text[i:j], i))
            i = j
            continue
        if ch in "+-*/^(),":
            tokens.append(_Token(ch, ch, i))
            i += 1
            continue
        raise ParseError(f"unexpected character {ch!r}", i)
    tokens.append(_Token("end", "", n))
    return tokens


class _Parser:
    def __init__(self, tokens, table: SymbolTable, strict: bool):
        self.tokens = tokens
        self.pos = 0
        self.table = table
        self.strict = strict

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind: str) -> _Token:
        tok = self.peek()
        if tok.kind != kind:
            raise ParseError(f"expected {kind!r}, found {tok.text!r}", tok.offset)
        return self.advance()

    def expression(self) -> Expr:
        node = self.term()
        while self.peek().kind in ("+", "-"):
            op = self.advance().kind
            rhs = self.term()
            if op == "-":
                rhs = Mul((MINUS_ONE, rhs))
            node = Add((node, rhs))
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.peek().kind in ("*", "/"):
            op = self.advance().kind
            rhs = self.unary()
            if op == "/":
                rhs = Pow(rhs, MINUS_ONE)
            node = Mul((node, rhs))
        return node

    def unary(self) -> Expr:
        negate = False
        while self.peek().kind in ("+", "-"):
            if self.advance().kind == "-":
                negate = not negate
        node = self.power()
        return Mul((MINUS_ONE, node)) if negate else node

    def power(self) -> Expr:
        base = self.atom()
        if self.peek().kind == "^":
            self.advance()
            return Pow(base, self.unary())
        return base

    def atom(self) -> Expr:
        tok = self.peek()
        if tok.kind == "number":
            self.advance()
            return Rat(Fraction(tok.text))
        if tok.kind == "(":
            self.advance()
            node = self.expression()
            self.expect(")")
            return node
        if tok.kind == "name":
            self.advance()
            if self.peek().kind == "(":
                self.advance()
                args = [self.expression()]
                while self.peek().kind == ",":
                    self.advance()
                    args.append(self.expression())
                self.expect(")")
                return self._call(tok, tuple(args))
            return self._symbol(tok)
        raise ParseError(f"expected an expression, found {tok.text!r}", tok.offset)

    def _symbol(self, tok: _Token) -> Expr:
        name = tok.text
        if not self.table.is_declared(name) and not self._register_jet(name):
            if self.strict:
                raise UndeclaredSymbolError(
                    f"undeclared symbol {name!r} (byte {tok.offset})")
            self.table.declare(name, "parameter")
        info = self.table.info(name)
        if info.kind == "arbitrary-function" and (info.arity or 0) >= 1:
            raise ArityError(
                f"function symbol {name!r} used without arguments (byte {tok.offset})")
        return Sym(name)

    def _register_jet(self, name: str) -> bool:
        # D_rrt style names resolve against a declared base function
        if "_" not in name:
            return False
        base, _, suffix = name.rpartition("_")
        if not base or not suffix or set(suffix) - {"r", "t"}:
            return False
        if suffix != "r" * suffix.count("r") + "t" * suffix.count("t"):
            return False
        if not self.table.is_declared(base):
            return False
        self.table.jet(base, suffix.count("r"), suffix.count("t"))
        return True

    def _call(self, tok: _Token, args: tuple) -> Expr:
        name = tok.text
        if name == "exp":
            if len(args) != 1:
                raise ArityError(f"exp takes one argument (byte {tok.offset})")
            return Call("exp", args)
        if not self.table.is_declared(name):
            if self.strict:
                raise UndeclaredSymbolError(
                    f"undeclared function {name!r} (byte {tok.offset})")
            self.table.declare(name, "arbitrary-function", arity=len(args))
        info = self.table.info(name)
        if info.kind != "arbitrary-function" or not (info.arity or 0):
            raise ArityError(
                f"{name!r} is not an applicable function (byte {tok.offset})")
        if info.arity != len(args):
            raise ArityError(
                f"{name!r} takes {info.arity} argument(s), got {len(args)} "
                f"(byte {tok.offset})")
        return Call(name, args)


def parse(text: str, table: SymbolTable, strict: bool = True) -> Expr:
    """Parse `text` and return the canonicalized expression."""
    parser = _Parser(_tokenize(text), table, strict)
    node = parser.expression()
    end = parser.peek()
    if end.kind != "end":
        raise ParseError(f"trailing input {end.text!r}", end.offset)
    return normalize(node)
