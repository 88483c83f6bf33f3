# netparse.py
# This module reads the plain-text reaction-network format into validated, immutable networks.
# Rate laws are sympy expressions, so Jacobians are exact; numerics go through lambdified callables.

import logging
import re
from fractions import Fraction
from functools import cached_property
from typing import Any, Dict, List, NamedTuple, Optional, Protocol, Sequence, Tuple, runtime_checkable

import numpy as np
import sympy as sp
from pydantic import BaseModel, ConfigDict, Field

from config import get_settings
from errors import (
    DuplicateDeclarationError,
    ModelInputError,
    NetworkDomainError,
    NetworkSyntaxError,
    NumericalError,
    RateEvaluationError,
    UnknownSymbolError,
)

# Configure logging
logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

IDENT = r"[A-Za-z_][A-Za-z0-9_]*"
NUMBER = r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"
SIGNED_NUMBER = rf"[+-]?{NUMBER}"
KEYWORDS = {"species", "param", "volume", "output", "reaction", "sqrt"}
EMPTY_SIDES = {"", "0", "∅"}
SINGULAR_CONDITION = 1e12

_TOKEN_RE = re.compile(rf"(?P<number>{NUMBER})|(?P<name>{IDENT})|(?P<op>[-+*/^()])")
_TERM_RE = re.compile(rf"\s*(?:(?P<coef>\d+)\s*)?(?P<name>{IDENT})\s*$")


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

@runtime_checkable
class KineticModel(Protocol):
    """Anything the LNA machinery can integrate: S, f(x), df/dx(x), volume and labels"""

    @property
    def stoichiometry(self) -> np.ndarray: ...

    @property
    def initial_state(self) -> np.ndarray: ...

    @property
    def state_labels(self) -> List[str]: ...

    @property
    def reaction_names(self) -> List[str]: ...

    @property
    def volume(self) -> float: ...

    def eval_rates(self, x: np.ndarray) -> np.ndarray: ...

    def rate_jacobian_at(self, x: np.ndarray) -> np.ndarray: ...


class Species(BaseModel):
    """A species with its initial concentration x0"""
    model_config = ConfigDict(frozen=True)

    name: str
    initial: float = Field(ge=0)


class Reaction(BaseModel):
    """Irreversible reaction channel with a macroscopic rate law"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    name: str
    reactants: List[Tuple[str, int]] = []
    products: List[Tuple[str, int]] = []
    rate: sp.Expr

    def net_change(self) -> Dict[str, int]:
        """Net molecule change per firing, products minus reactants"""
        change: Dict[str, int] = {}
        for name, coef in self.reactants:
            change[name] = change.get(name, 0) - coef
        for name, coef in self.products:
            change[name] = change.get(name, 0) + coef
        return {name: value for name, value in change.items() if value != 0}


class SymbolicJacobian(BaseModel):
    """R x n matrix of rate derivatives df/dx, exact and evaluable at any state"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    matrix: sp.Matrix
    network: Any

    def entry(self, reaction: str, species: str) -> sp.Expr:
        i = self.network.reaction_names.index(reaction)
        j = self.network.species_names.index(species)
        return self.matrix[i, j]

    def evaluate(self, x: Sequence[float]) -> np.ndarray:
        return self.network.rate_jacobian_at(x)


class ReactionNetwork(BaseModel):
    """
    Validated reaction network: species with x0, global parameters,
    reactions with symbolic rates, compartment volume and output species.
    Instances are immutable; derived arrays and compiled rate functions are cached.
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    species: List[Species]
    parameters: Dict[str, float] = {}
    reactions: List[Reaction]
    volume: float = Field(default_factory=lambda: get_settings().default_volume, gt=0)
    outputs: List[str] = []

    @cached_property
    def species_names(self) -> List[str]:
        return [s.name for s in self.species]

    @property
    def state_labels(self) -> List[str]:
        return self.species_names

    @cached_property
    def reaction_names(self) -> List[str]:
        return [r.name for r in self.reactions]

    @cached_property
    def output_names(self) -> List[str]:
        return list(self.outputs) if self.outputs else list(self.species_names)

    @cached_property
    def initial_state(self) -> np.ndarray:
        return np.array([s.initial for s in self.species], dtype=float)

    @cached_property
    def stoichiometry(self) -> np.ndarray:
        index = {name: i for i, name in enumerate(self.species_names)}
        S = np.zeros((len(self.species), len(self.reactions)))
        for j, reaction in enumerate(self.reactions):
            for name, value in reaction.net_change().items():
                S[index[name], j] = value
        return S

    @cached_property
    def symbols(self) -> Dict[str, sp.Symbol]:
        names = self.species_names + list(self.parameters)
        return {name: sp.Symbol(name, real=True) for name in names}

    @cached_property
    def species_symbols(self) -> List[sp.Symbol]:
        return [self.symbols[name] for name in self.species_names]

    @cached_property
    def parameter_symbols(self) -> List[sp.Symbol]:
        return [self.symbols[name] for name in self.parameters]

    @cached_property
    def parameter_values(self) -> np.ndarray:
        return np.array(list(self.parameters.values()), dtype=float)

    @cached_property
    def rate_expressions(self) -> List[sp.Expr]:
        return [r.rate for r in self.reactions]

    @cached_property
    def jacobian_matrix(self) -> sp.Matrix:
        return sp.Matrix(self.rate_expressions).jacobian(self.species_symbols)

    def _lambda_args(self) -> List[Any]:
        if self.parameter_symbols:
            return [self.species_symbols, self.parameter_symbols]
        return [self.species_symbols]

    def _call_args(self, x: np.ndarray) -> List[np.ndarray]:
        if self.parameter_symbols:
            return [x, self.parameter_values]
        return [x]

    @cached_property
    def rate_function(self):
        return sp.lambdify(self._lambda_args(), self.rate_expressions, modules="numpy")

    @cached_property
    def jacobian_function(self):
        return sp.lambdify(self._lambda_args(), self.jacobian_matrix, modules="numpy")

    def output_matrix(self) -> np.ndarray:
        """Selection matrix C mapping states to the declared outputs"""
        C = np.zeros((len(self.output_names), len(self.species)))
        for row, name in enumerate(self.output_names):
            C[row, self.species_names.index(name)] = 1.0
        return C

    def _check_state(self, x: Sequence[float]) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (len(self.species),):
            raise ModelInputError(f"state has shape {x.shape}, expected ({len(self.species)},)")
        if not np.all(np.isfinite(x)):
            raise NumericalError(f"non-finite state vector {x}")
        return x

    def eval_rates(self, x: Sequence[float]) -> np.ndarray:
        """Evaluate the macroscopic rate vector f(x)"""
        x = self._check_state(x)
        try:
            with np.errstate(all="ignore"):
                values = np.asarray(self.rate_function(*self._call_args(x)), dtype=float).reshape(-1)
        except ZeroDivisionError:
            values = np.full(len(self.reactions), np.nan)
        bad = np.flatnonzero(~np.isfinite(values))
        if bad.size:
            reaction = self.reactions[bad[0]]
            raise RateEvaluationError(reaction.name, self._diagnose(reaction.rate, x))
        return values

    def rate_jacobian_at(self, x: Sequence[float]) -> np.ndarray:
        """Numeric R x n Jacobian of f at x"""
        x = self._check_state(x)
        try:
            with np.errstate(all="ignore"):
                values = np.asarray(self.jacobian_function(*self._call_args(x)), dtype=float)
        except ZeroDivisionError:
            values = np.full((len(self.reactions), len(self.species)), np.nan)
        values = values.reshape(len(self.reactions), len(self.species))
        bad = np.argwhere(~np.isfinite(values))
        if bad.size:
            i, j = bad[0]
            raise RateEvaluationError(
                self.reactions[i].name,
                f"derivative with respect to '{self.species_names[j]}' is not finite: "
                f"{self._diagnose(self.jacobian_matrix[i, j], x)}",
            )
        return values

    def _diagnose(self, expr: sp.Expr, x: np.ndarray) -> str:
        """Name the first sub-expression that breaks evaluation"""
        subs = {self.symbols[name]: value for name, value in zip(self.species_names, x)}
        subs.update({self.symbols[name]: value for name, value in self.parameters.items()})
        for node in sp.preorder_traversal(expr):
            if not isinstance(node, sp.Pow):
                continue
            try:
                base = complex(node.base.evalf(subs=subs))
            except (TypeError, ValueError):
                continue
            exponent = node.exp
            if exponent.is_negative and base == 0:
                return f"division by zero in '{expression_to_dsl(node)}'"
            if not exponent.is_integer and base.real < 0:
                return f"negative value {base.real:.6g} under root in '{expression_to_dsl(node)}'"
        return "non-finite value (NaN/Inf propagation)"

    def with_volume(self, volume: float) -> "ReactionNetwork":
        """Copy of the network with another compartment volume"""
        if not volume > 0:
            raise NetworkDomainError(f"volume must be positive, got {volume}")
        return ReactionNetwork(
            species=self.species,
            parameters=self.parameters,
            reactions=self.reactions,
            volume=volume,
            outputs=self.outputs,
        )


class TransformedNetwork(BaseModel):
    """
    Network in transformed species m = T n: stoichiometry T S and rates f(T^-1 m).
    The base may itself be transformed, so transforms compose.
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    base: Any
    T: np.ndarray
    T_inv: np.ndarray
    condition_number: float

    @cached_property
    def stoichiometry(self) -> np.ndarray:
        return self.T @ self.base.stoichiometry

    @cached_property
    def initial_state(self) -> np.ndarray:
        return self.T @ self.base.initial_state

    @cached_property
    def state_labels(self) -> List[str]:
        return [f"mode_{i + 1}" for i in range(self.T.shape[0])]

    @property
    def reaction_names(self) -> List[str]:
        return self.base.reaction_names

    @property
    def volume(self) -> float:
        return self.base.volume

    def output_matrix(self) -> np.ndarray:
        return self.base.output_matrix() @ self.T_inv

    def eval_rates(self, m: Sequence[float]) -> np.ndarray:
        return self.base.eval_rates(self.T_inv @ np.asarray(m, dtype=float))

    def rate_jacobian_at(self, m: Sequence[float]) -> np.ndarray:
        return self.base.rate_jacobian_at(self.T_inv @ np.asarray(m, dtype=float)) @ self.T_inv


# ---------------------------------------------------------------------------
# Expression parsing
# ---------------------------------------------------------------------------

class _Token(NamedTuple):
    kind: str
    text: str
    column: int


def _tokenize(text: str, line: int, first_column: int) -> List[_Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos].isspace():
            pos += 1
            continue
        match = _TOKEN_RE.match(text, pos)
        if match is None:
            raise NetworkSyntaxError(f"unexpected character {text[pos]!r}", line, first_column + pos)
        kind = match.lastgroup
        tokens.append(_Token(kind, match.group(kind), first_column + pos))
        pos = match.end()
    tokens.append(_Token("end", "", first_column + len(text)))
    return tokens


class _ExpressionParser:
    """Recursive-descent parser producing sympy expressions; ^ binds tighter than unary minus"""

    def __init__(self, text: str, symbols: Dict[str, sp.Symbol], line: int, first_column: int):
        self.tokens = _tokenize(text, line, first_column)
        self.symbols = symbols
        self.line = line
        self.pos = 0

    @property
    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def _advance(self) -> _Token:
        token = self.tokens[self.pos]
        self.pos += 1
        return token

    def _is_op(self, *ops: str) -> bool:
        return self.peek.kind == "op" and self.peek.text in ops

    def _expect(self, op: str):
        if not self._is_op(op):
            found = self.peek.text or "end of line"
            raise NetworkSyntaxError(f"expected '{op}', found '{found}'", self.line, self.peek.column)
        self._advance()

    def parse(self) -> sp.Expr:
        if self.peek.kind == "end":
            raise NetworkSyntaxError("missing rate expression", self.line, self.peek.column)
        expr = self._sum()
        if self.peek.kind != "end":
            raise NetworkSyntaxError(f"unexpected '{self.peek.text}'", self.line, self.peek.column)
        return expr

    def _sum(self) -> sp.Expr:
        node = self._product()
        while self._is_op("+", "-"):
            op = self._advance().text
            rhs = self._product()
            node = node + rhs if op == "+" else node - rhs
        return node

    def _product(self) -> sp.Expr:
        node = self._unary()
        while self._is_op("*", "/"):
            op = self._advance().text
            rhs = self._unary()
            node = node * rhs if op == "*" else node / rhs
        return node

    def _unary(self) -> sp.Expr:
        if self._is_op("-"):
            self._advance()
            return -self._unary()
        if self._is_op("+"):
            self._advance()
            return self._unary()
        return self._power()

    def _power(self) -> sp.Expr:
        base = self._atom()
        if self._is_op("^"):
            caret = self._advance()
            exponent = self._unary()
            if exponent.free_symbols or not exponent.is_Rational:
                raise NetworkSyntaxError("power exponent must be a constant integer or rational", self.line, caret.column)
            return sp.Pow(base, exponent)
        return base

    def _atom(self) -> sp.Expr:
        token = self._advance()
        if token.kind == "number":
            value = Fraction(token.text)
            return sp.Rational(value.numerator, value.denominator)
        if token.kind == "name":
            if token.text == "sqrt":
                self._expect("(")
                inner = self._sum()
                self._expect(")")
                return sp.sqrt(inner)
            if token.text not in self.symbols:
                raise UnknownSymbolError(token.text, self.line, token.column)
            return self.symbols[token.text]
        if token.kind == "op" and token.text == "(":
            inner = self._sum()
            self._expect(")")
            return inner
        found = token.text or "end of line"
        raise NetworkSyntaxError(f"unexpected '{found}'", self.line, token.column)


def parse_expression(text: str, symbols: Dict[str, sp.Symbol], line: int = 1, first_column: int = 1) -> sp.Expr:
    """Parse one rate expression against a symbol table"""
    expr = _ExpressionParser(text, symbols, line, first_column).parse()
    if expr.has(sp.zoo, sp.oo, sp.nan, sp.I):
        raise NetworkDomainError(f"line {line}: rate expression '{text.strip()}' is not a finite real expression")
    return expr


def expression_to_dsl(expr: sp.Expr) -> str:
    """Print a rate expression in the DSL's operator syntax"""
    return sp.sstr(expr).replace("**", "^")


# ---------------------------------------------------------------------------
# Statement parsing
# ---------------------------------------------------------------------------

class _Statement(NamedTuple):
    keyword: str
    fields: Dict[str, Tuple[str, int]]
    line: int


def _match_sequence(text: str, pieces: List[Tuple[str, str, str]], line: int) -> Dict[str, Tuple[str, int]]:
    """Match (field, regex, description) pieces left to right, reporting the first mismatch column"""
    fields = {}
    pos = 0
    for field, pattern, description in pieces:
        match = re.compile(pattern).match(text, pos)
        if match is None:
            raise NetworkSyntaxError(f"expected {description}", line, pos + 1)
        fields[field] = (match.group(0).strip(), pos + 1 + (len(match.group(0)) - len(match.group(0).lstrip())))
        pos = match.end()
    return fields


def _parse_statement(raw: str, line: int) -> Optional[_Statement]:
    text = raw.split("#", 1)[0].rstrip()
    if not text.strip():
        return None
    keyword_match = re.match(rf"\s*({IDENT})", text)
    if keyword_match is None:
        column = len(text) - len(text.lstrip()) + 1
        raise NetworkSyntaxError("expected a statement keyword", line, column)
    keyword = keyword_match.group(1)
    ws = r"\s*"
    if keyword in ("species", "param"):
        pieces = [
            ("keyword", rf"\s*{keyword}\s+", keyword),
            ("name", IDENT, "an identifier"),
            ("eq", rf"{ws}={ws}", "'='"),
            ("value", SIGNED_NUMBER, "a number"),
            ("end", r"\s*$", "end of line"),
        ]
    elif keyword == "volume":
        pieces = [
            ("keyword", r"\s*volume", "volume"),
            ("eq", rf"{ws}={ws}", "'='"),
            ("value", SIGNED_NUMBER, "a number"),
            ("end", r"\s*$", "end of line"),
        ]
    elif keyword == "output":
        pieces = [
            ("keyword", r"\s*output\s+", "output"),
            ("names", rf"{IDENT}(?:\s+{IDENT})*", "species names"),
            ("end", r"\s*$", "end of line"),
        ]
    elif keyword == "reaction":
        pieces = [
            ("keyword", r"\s*reaction\s+", "reaction"),
            ("name", IDENT, "a reaction name"),
            ("colon", rf"{ws}:", "':'"),
            ("lhs", r"[^@]*?(?=->)", "'->'"),
            ("arrow", r"->", "'->'"),
            ("rhs", r"[^@]*?(?=@)", "'@' followed by a rate expression"),
            ("at", r"@", "'@'"),
            ("rate", r".*$", "a rate expression"),
        ]
    else:
        raise NetworkSyntaxError(f"unknown statement '{keyword}'", line, keyword_match.start(1) + 1)
    fields = _match_sequence(text, pieces, line)
    if "rate" in fields:
        # keep the untrimmed expression so token columns stay exact
        at_column = fields["at"][1]
        fields["rate"] = (text[at_column:], at_column + 1)
        fields["lhs"] = (text[fields["colon"][1]:fields["arrow"][1] - 1], fields["colon"][1] + 1)
        fields["rhs"] = (text[fields["arrow"][1] + 1:at_column - 1], fields["arrow"][1] + 2)
    return _Statement(keyword, fields, line)


def _parse_side(text: str, first_column: int, line: int, species: Dict[str, float]) -> List[Tuple[str, int]]:
    if text.strip() in EMPTY_SIDES:
        return []
    terms = []
    offset = 0
    for part in text.split("+"):
        column = first_column + offset
        offset += len(part) + 1
        match = _TERM_RE.match(part)
        if match is None:
            lead = len(part) - len(part.lstrip())
            raise NetworkSyntaxError("expected '[coefficient] species'", line, column + lead)
        name = match.group("name")
        coef = int(match.group("coef")) if match.group("coef") else 1
        if name not in species:
            raise UnknownSymbolError(name, line, column + match.start("name"))
        if coef <= 0:
            raise NetworkSyntaxError("stoichiometric coefficient must be a positive integer", line, column + match.start("coef"))
        terms.append((name, coef))
    return terms


def parse_network(text: str) -> ReactionNetwork:
    """
    Parse DSL text into a validated ReactionNetwork

    Args:
        text: model source (species, param, volume, output and reaction statements)

    Returns:
        ReactionNetwork: species in declaration order, S assembled column-per-reaction
    """
    statements = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        statement = _parse_statement(raw, line_no)
        if statement is not None:
            statements.append(statement)

    species: Dict[str, float] = {}
    parameters: Dict[str, float] = {}
    volume: Optional[float] = None
    outputs: List[str] = []
    output_lines: List[_Statement] = []
    reaction_statements: List[_Statement] = []

    def declare(name: str, statement: _Statement):
        if name in KEYWORDS:
            raise NetworkSyntaxError(f"'{name}' is a reserved word", statement.line, statement.fields["name"][1])
        if name in species or name in parameters:
            raise DuplicateDeclarationError(f"line {statement.line}: '{name}' is declared twice")

    for statement in statements:
        if statement.keyword == "species":
            name, value = statement.fields["name"][0], float(statement.fields["value"][0])
            declare(name, statement)
            if value < 0:
                raise NetworkDomainError(f"line {statement.line}: initial concentration of '{name}' is negative")
            species[name] = value
        elif statement.keyword == "param":
            name, value = statement.fields["name"][0], float(statement.fields["value"][0])
            declare(name, statement)
            parameters[name] = value
        elif statement.keyword == "volume":
            if volume is not None:
                raise DuplicateDeclarationError(f"line {statement.line}: volume declared twice")
            volume = float(statement.fields["value"][0])
            if not volume > 0:
                raise NetworkDomainError(f"line {statement.line}: volume must be positive, got {volume}")
        elif statement.keyword == "output":
            output_lines.append(statement)
        else:
            reaction_statements.append(statement)

    if not species:
        raise NetworkDomainError("network declares no species")
    if not reaction_statements:
        raise NetworkDomainError("network declares no reactions")

    for statement in output_lines:
        names_text, column = statement.fields["names"]
        for match in re.finditer(IDENT, names_text):
            name = match.group(0)
            if name not in species:
                raise UnknownSymbolError(name, statement.line, column + match.start())
            if name in outputs:
                raise DuplicateDeclarationError(f"line {statement.line}: output '{name}' listed twice")
            outputs.append(name)

    symbols = {name: sp.Symbol(name, real=True) for name in list(species) + list(parameters)}
    reactions: List[Reaction] = []
    for statement in reaction_statements:
        name = statement.fields["name"][0]
        if name in {r.name for r in reactions}:
            raise DuplicateDeclarationError(f"line {statement.line}: reaction '{name}' declared twice")
        reactants = _parse_side(*statement.fields["lhs"], statement.line, species)
        products = _parse_side(*statement.fields["rhs"], statement.line, species)
        rate_text, rate_column = statement.fields["rate"]
        rate = parse_expression(rate_text, symbols, statement.line, rate_column)
        reaction = Reaction(name=name, reactants=reactants, products=products, rate=rate)
        if not reaction.net_change():
            raise NetworkDomainError(f"line {statement.line}: reaction '{name}' has zero net stoichiometry")
        reactions.append(reaction)

    network = ReactionNetwork(
        species=[Species(name=name, initial=value) for name, value in species.items()],
        parameters=parameters,
        reactions=reactions,
        volume=volume if volume is not None else get_settings().default_volume,
        outputs=outputs,
    )
    _validate_initial_rates(network)
    logger.info(
        f"Parsed network: {len(network.species)} species, {len(network.reactions)} reactions, "
        f"volume {network.volume:g}"
    )
    return network


def _validate_initial_rates(network: ReactionNetwork):
    try:
        rates = network.eval_rates(network.initial_state)
    except RateEvaluationError as e:
        raise NetworkDomainError(f"rate of reaction '{e.reaction}' is not finite at x0: {e.cause}") from e
    negative = np.flatnonzero(rates < 0)
    if negative.size:
        name = network.reaction_names[negative[0]]
        raise NetworkDomainError(f"rate of reaction '{name}' is negative at x0 ({rates[negative[0]]:.6g})")


def load_network(path: str) -> ReactionNetwork:
    """Read and parse a model file"""
    try:
        with open(path, encoding="utf-8") as handle:
            text = handle.read()
    except FileNotFoundError:
        raise ModelInputError(f"model file not found: {path}")
    except UnicodeDecodeError as e:
        raise ModelInputError(f"model file {path} is not UTF-8: {e}")
    return parse_network(text)


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def eval_rates(net: KineticModel, x: Sequence[float]) -> np.ndarray:
    """Rate vector f(x)"""
    return net.eval_rates(x)


def rate_jacobian(net: ReactionNetwork) -> SymbolicJacobian:
    """Symbolic df/dx (R x n), evaluable at any state"""
    return SymbolicJacobian(matrix=net.jacobian_matrix, network=net)


def transform_network(net: KineticModel, T: Sequence[Sequence[float]]) -> TransformedNetwork:
    """
    Apply the constant change of species m = T n

    Args:
        net: base network (or an already transformed one)
        T: invertible (#species x #species) matrix

    Returns:
        TransformedNetwork with stoichiometry T S, rates f(T^-1 m) and m0 = T x0
    """
    T = np.array(T, dtype=float)
    n = net.stoichiometry.shape[0]
    if T.shape != (n, n):
        raise NetworkDomainError(f"transformation has shape {T.shape}, expected ({n}, {n})")
    condition = float(np.linalg.cond(T))
    if not np.isfinite(condition) or condition > SINGULAR_CONDITION:
        raise NetworkDomainError(f"transformation is numerically singular (condition number {condition:.3e})")
    T_inv = np.linalg.inv(T)
    T.setflags(write=False)
    T_inv.setflags(write=False)
    logger.info(f"Transformed network with condition number {condition:.3e}")
    return TransformedNetwork(base=net, T=T, T_inv=T_inv, condition_number=condition)


def permute_species(net: ReactionNetwork, perm: Sequence[int]) -> ReactionNetwork:
    """Reorder species so that new position i holds old species perm[i]"""
    perm = [int(p) for p in perm]
    if sorted(perm) != list(range(len(net.species))):
        raise NetworkDomainError(f"permutation {perm} is not a bijection on {len(net.species)} species")
    return ReactionNetwork(
        species=[net.species[p] for p in perm],
        parameters=net.parameters,
        reactions=net.reactions,
        volume=net.volume,
        outputs=net.outputs,
    )


def format_network(net: ReactionNetwork) -> str:
    """Serialize a network back to the DSL; parse_network(format_network(n)) reproduces n"""
    lines = [f"volume = {net.volume!r}"]
    lines += [f"species {s.name} = {s.initial!r}" for s in net.species]
    lines += [f"param {name} = {value!r}" for name, value in net.parameters.items()]
    if net.outputs:
        lines.append("output " + " ".join(net.outputs))

    def side(terms: List[Tuple[str, int]]) -> str:
        return " + ".join(name if coef == 1 else f"{coef} {name}" for name, coef in terms)

    for reaction in net.reactions:
        lines.append(
            f"reaction {reaction.name}: {side(reaction.reactants)} -> {side(reaction.products)} "
            f"@ {expression_to_dsl(reaction.rate)}"
        )
    return "\n".join(lines) + "\n"
