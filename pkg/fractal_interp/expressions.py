"""Small arithmetic expression language for user-defined functions.

Grammar: numbers, variables, the constants pi and e, binary + - * / ^,
unary minus and calls to sin, cos, exp, log, abs, sqrt, min, max.
Precedence from tight to loose: ^ (right-associative), unary -, * /, + -.
Evaluation is vectorised over numpy arrays; nothing user-supplied is executed.
"""
import logging
import re
from collections import namedtuple

import numpy as np

from .errors import ExpressionDomainError, ExpressionSyntaxError, UnknownIdentifier

logger = logging.getLogger(__name__)

Token = namedtuple('Token', ['kind', 'text', 'position'])

TOKEN_PATTERN = re.compile(
    r'\s*(?:'
    r'(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)'
    r'|(?P<name>[A-Za-z_][A-Za-z_0-9]*)'
    r'|(?P<op>[-+*/^(),])'
    r')'
)

CONSTANTS = {'pi': np.pi, 'e': np.e}
FUNCTIONS = {
    'sin': (1, 1),
    'cos': (1, 1),
    'exp': (1, 1),
    'log': (1, 1),
    'abs': (1, 1),
    'sqrt': (1, 1),
    'min': (1, None),
    'max': (1, None),
}
VARIABLE_PATTERN = re.compile(r'x[1-9]\d*$')

# binding powers
ADDITIVE = 10
MULTIPLICATIVE = 20
UNARY = 25
POWER = 30
BINDING = {'+': ADDITIVE, '-': ADDITIVE, '*': MULTIPLICATIVE, '/': MULTIPLICATIVE, '^': POWER}


def tokenize(source):
    tokens = []
    position = 0
    while position < len(source):
        if source[position:].strip() == '':
            break
        match = TOKEN_PATTERN.match(source, position)
        if match is None or match.end() == position:
            start = position + len(source[position:]) - len(source[position:].lstrip())
            raise ExpressionSyntaxError(
                f'unexpected character {source[start]!r} at position {start}',
                position=start,
                expected='a number, a name or an operator',
            )
        kind = match.lastgroup
        text = match.group(kind)
        tokens.append(Token(kind, text, match.start(kind)))
        position = match.end()
    tokens.append(Token('end', '', len(source)))
    return tokens


class Node:
    position = 0

    def names(self):
        return set()


class Number(Node):
    def __init__(self, value, position):
        self.value = value
        self.position = position

    def evaluate(self, env):
        return self.value


class Name(Node):
    def __init__(self, name, position):
        self.name = name
        self.position = position

    def names(self):
        return set() if self.name in CONSTANTS else {self.name}

    def evaluate(self, env):
        if self.name in CONSTANTS:
            return CONSTANTS[self.name]
        try:
            return env[self.name]
        except KeyError:
            raise UnknownIdentifier(
                f'no value bound to {self.name!r} (position {self.position})',
                name=self.name,
                position=self.position,
            ) from None


class Negate(Node):
    def __init__(self, operand, position):
        self.operand = operand
        self.position = position

    def names(self):
        return self.operand.names()

    def evaluate(self, env):
        return -self.operand.evaluate(env)


class Binary(Node):
    def __init__(self, op, left, right, position):
        self.op = op
        self.left = left
        self.right = right
        self.position = position

    def names(self):
        return self.left.names() | self.right.names()

    def evaluate(self, env):
        left = self.left.evaluate(env)
        right = self.right.evaluate(env)
        if self.op == '+':
            return left + right
        if self.op == '-':
            return left - right
        if self.op == '*':
            return left * right
        if self.op == '/':
            if np.any(np.asarray(right) == 0):
                raise ExpressionDomainError(
                    f'division by zero at position {self.position}', position=self.position,
                )
            return np.divide(left, right)
        with np.errstate(invalid='ignore', divide='ignore', over='ignore'):
            result = np.power(np.asarray(left, dtype=float), right)
        return _checked(result, self, 'power')


class Call(Node):
    def __init__(self, name, args, position):
        self.name = name
        self.args = args
        self.position = position

    def names(self):
        return set().union(*(arg.names() for arg in self.args))

    def evaluate(self, env):
        args = [np.asarray(arg.evaluate(env), dtype=float) for arg in self.args]
        if self.name == 'min':
            return _reduce(np.minimum, args)
        if self.name == 'max':
            return _reduce(np.maximum, args)
        value = args[0]
        if self.name == 'log' and np.any(value <= 0):
            raise ExpressionDomainError(
                f'log of a non-positive value at position {self.position}', position=self.position,
            )
        if self.name == 'sqrt' and np.any(value < 0):
            raise ExpressionDomainError(
                f'sqrt of a negative value at position {self.position}', position=self.position,
            )
        with np.errstate(over='ignore'):
            result = getattr(np, self.name)(value)
        return _checked(result, self, self.name)


def _reduce(function, args):
    result = args[0]
    for arg in args[1:]:
        result = function(result, arg)
    return result


def _checked(result, node, what):
    if not np.all(np.isfinite(result)):
        raise ExpressionDomainError(
            f'{what} is undefined or overflows at position {node.position}',
            position=node.position,
        )
    return result


class Parser:
    """Pratt parser over the token list"""

    def __init__(self, source, variables=None):
        self.source = source
        self.tokens = tokenize(source)
        self.index = 0
        self.variables = variables

    @property
    def token(self):
        return self.tokens[self.index]

    def advance(self):
        token = self.token
        self.index += 1
        return token

    def fail(self, token, expected):
        found = 'end of input' if token.kind == 'end' else repr(token.text)
        raise ExpressionSyntaxError(
            f'expected {expected} at position {token.position}, found {found}',
            position=token.position,
            expected=expected,
        )

    def parse(self):
        node = self.expression(0)
        if self.token.kind != 'end':
            self.fail(self.token, 'an operator or end of input')
        return node

    def expression(self, rbp):
        left = self.prefix(self.advance())
        while self.token.kind == 'op' and rbp < BINDING.get(self.token.text, 0):
            token = self.advance()
            # ^ is right-associative
            power = BINDING[token.text] - 1 if token.text == '^' else BINDING[token.text]
            left = Binary(token.text, left, self.expression(power), token.position)
        return left

    def prefix(self, token):
        if token.kind == 'number':
            return Number(float(token.text), token.position)
        if token.kind == 'name':
            return self.name(token)
        if token.text == '-':
            return Negate(self.expression(UNARY), token.position)
        if token.text == '(':
            node = self.expression(0)
            self.expect(')')
            return node
        self.fail(token, 'a number, a name, - or (')

    def expect(self, text):
        if self.token.text != text:
            self.fail(self.token, repr(text))
        return self.advance()

    def name(self, token):
        if token.text in FUNCTIONS:
            self.expect('(')
            args = [self.expression(0)]
            while self.token.text == ',':
                self.advance()
                args.append(self.expression(0))
            self.expect(')')
            low, high = FUNCTIONS[token.text]
            if len(args) < low or (high is not None and len(args) > high):
                raise ExpressionSyntaxError(
                    f'{token.text} takes {low if high == low else f"at least {low}"} '
                    f'argument(s), got {len(args)} (position {token.position})',
                    position=token.position,
                    expected=f'{low} argument(s)',
                )
            return Call(token.text, args, token.position)
        if token.text in CONSTANTS:
            return Name(token.text, token.position)
        allowed = (
            VARIABLE_PATTERN.match(token.text) is not None
            if self.variables is None else token.text in self.variables
        )
        if not allowed:
            raise UnknownIdentifier(
                f'unknown identifier {token.text!r} at position {token.position}',
                name=token.text,
                position=token.position,
            )
        return Name(token.text, token.position)


class ExpressionAst:
    """Parsed expression with its source and free variables"""

    def __init__(self, source, root):
        self.source = source
        self.root = root

    @property
    def free_variables(self):
        return self.root.names()

    def evaluate(self, env):
        return self.root.evaluate(env)

    def as_function(self, n, extra=None):
        """Vectorised f(points) over (P, n) arrays, x_k bound to column k-1.

        ``extra`` maps further names to callables of the same points.
        """
        extra = extra or {}
        outside = {
            name for name in self.free_variables
            if name not in extra and not (VARIABLE_PATTERN.match(name) and int(name[1:]) <= n)
        }
        if outside:
            raise UnknownIdentifier(
                f'{self.source!r} uses {sorted(outside)} on a {n}-dimensional domain',
                names=sorted(outside),
            )

        def function(points):
            env = {f'x{k + 1}': points[:, k] for k in range(n)}
            env.update({name: provider(points) for name, provider in extra.items()})
            return self.evaluate(env)

        function.label = self.source
        return function

    def __repr__(self):
        return f'ExpressionAst({self.source!r})'


def parse_expression(source, variables=None):
    """Parse ``source``; names must be x1, x2, ... unless ``variables`` is given"""
    if not isinstance(source, str):
        raise ExpressionSyntaxError('expression must be text', position=0, expected='a string')
    root = Parser(source, variables).parse()
    logger.debug(f'Parsed expression {source!r}')
    return ExpressionAst(source, root)
