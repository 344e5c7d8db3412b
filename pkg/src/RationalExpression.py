"""
Rational Expressions
====================

Noncommutative rational expressions as directed acyclic graphs.

Features:
- Hash-consed DAG of Const/Var/Add/Mul/Inv nodes, shared subtrees stored once
- arpeggio grammar: expr := term {(+|-) term}; term := factor {* factor}
- Domain-tracked evaluation on matrix tuples (ill-conditioned inverses leave the domain)
- Formal linear representations (u, A, v) built by structural recursion
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, List, NamedTuple, Optional, Tuple, Union

import numpy as np
from arpeggio import EOF, NoMatch, Optional as Opt, ParserPython, PTNodeVisitor, Terminal, ZeroOrMore, visit_parse_tree
from arpeggio import RegExMatch as _

import ExactLinalg
from ExactLinalg import ONE, ZERO, ExactScalar, ScalarLike
from LinearPencil import LinearPencil, pencil_to_json, scalar_to_json
from NCPoly import DimensionMismatchError, MatrixTuple, NCPoly

logger = logging.getLogger(__name__)

DOMAIN_TOL = 1e-12
CONSISTENCY_TOL = 1e-8


class ExpressionSyntaxError(ValueError):
    """Expression text is not in the grammar"""

    def __init__(self, message: str, position: int = 0, line: int = 1, column: int = 1):
        super().__init__(message)
        self.position = position
        self.line = line
        self.column = column


class DomainError(ValueError):
    """Evaluation point lies outside the domain: an inverse was taken of a singular value"""

    def __init__(self, message: str, node: Optional[int] = None, condition: float = float('inf')):
        super().__init__(message)
        self.node = node
        self.condition = condition


@dataclass(frozen=True)
class Const:
    value: ExactScalar


@dataclass(frozen=True)
class Var:
    index: int


@dataclass(frozen=True)
class Add:
    left: int
    right: int


@dataclass(frozen=True)
class Mul:
    left: int
    right: int


@dataclass(frozen=True)
class Inv:
    child: int


Node = Union[Const, Var, Add, Mul, Inv]


def _children(node: Node) -> Tuple[int, ...]:
    if isinstance(node, (Add, Mul)):
        return (node.left, node.right)
    if isinstance(node, Inv):
        return (node.child,)
    return ()


@dataclass(frozen=True)
class RatExpr:
    """Rational expression; children always precede their parents in `nodes`"""
    nodes: Tuple[Node, ...]
    root: int
    nvars: int

    def __post_init__(self):
        if not 0 <= self.root < len(self.nodes):
            raise ValueError(f"Root {self.root} is not a node id")
        used = set()
        for i, node in enumerate(self.nodes):
            for c in _children(node):
                if not 0 <= c < i:
                    raise ValueError(f"Node {i} refers to {c}; children must come first")
                used.add(c)
            if isinstance(node, Var) and not 1 <= node.index <= self.nvars:
                raise ValueError(f"Variable x{node.index} outside x1..x{self.nvars}")
        sinks = [i for i in range(len(self.nodes)) if i not in used]
        if sinks != [self.root]:
            raise ValueError(f"Expected the root as the only sink, found {sinks}")

    def count(self, kind: type) -> int:
        return sum(isinstance(node, kind) for node in self.nodes)

    def __str__(self):
        return to_text(self)


class ExprBuilder:
    """Hash-consing constructor; identical subexpressions get one id"""

    def __init__(self):
        self._nodes: List[Node] = []
        self._ids: Dict[Node, int] = {}

    def _intern(self, node: Node) -> int:
        if node not in self._ids:
            self._ids[node] = len(self._nodes)
            self._nodes.append(node)
        return self._ids[node]

    def const(self, value: ScalarLike) -> int:
        return self._intern(Const(ExactScalar.of(value)))

    def var(self, index: int) -> int:
        return self._intern(Var(int(index)))

    def add(self, left: int, right: int) -> int:
        return self._intern(Add(left, right))

    def mul(self, left: int, right: int) -> int:
        return self._intern(Mul(left, right))

    def inv(self, child: int) -> int:
        return self._intern(Inv(child))

    def neg(self, child: int) -> int:
        node = self._nodes[child]
        if isinstance(node, Const):
            return self.const(-node.value)
        return self.mul(self.const(-ONE), child)

    def sub(self, left: int, right: int) -> int:
        return self.add(left, self.neg(right))

    def build(self, root: int, nvars: Optional[int] = None) -> RatExpr:
        """Keep only what the root reaches, renumbered in creation order"""

        reachable, stack = set(), [root]
        while stack:
            i = stack.pop()
            if i not in reachable:
                reachable.add(i)
                stack.extend(_children(self._nodes[i]))
        order = sorted(reachable)
        remap = {old: new for new, old in enumerate(order)}
        nodes = []
        for old in order:
            node = self._nodes[old]
            if isinstance(node, Add):
                node = Add(remap[node.left], remap[node.right])
            elif isinstance(node, Mul):
                node = Mul(remap[node.left], remap[node.right])
            elif isinstance(node, Inv):
                node = Inv(remap[node.child])
            nodes.append(node)
        used = max((n.index for n in nodes if isinstance(n, Var)), default=0)
        if nvars is None:
            nvars = used
        elif nvars < used:
            raise ValueError(f"Expression uses x{used} but nvars={nvars}")
        return RatExpr(tuple(nodes), remap[root], nvars)


# Grammar

def additive():
    return _(r'[+-]')


def scalar():
    return _(r'(?:\d+(?:\.\d*)?|\.\d+)(?:/\d+)?i?|i(?![A-Za-z0-9_(])')


def variable():
    return _(r'x\d+|[xyz](?![A-Za-z0-9_])')


def inverse():
    return "inv", "(", expression, ")"


def group():
    return "(", expression, ")"


def factor():
    return [inverse, group, scalar, variable]


def term():
    return Opt(additive), factor, ZeroOrMore("*", factor)


def expression():
    return term, ZeroOrMore(additive, term)


def source():
    return expression, EOF


class _NodeRef(NamedTuple):
    id: int


_LETTERS = {'x': 1, 'y': 2, 'z': 3}
_SKIP = {'(', ')', '*', 'inv', ''}


def _flatten(children) -> list:
    flat = []
    for child in children:
        if isinstance(child, list):
            flat.extend(_flatten(child))
        elif child is not None and not (isinstance(child, str) and child in _SKIP):
            flat.append(child)
    return flat


class _ExprVisitor(PTNodeVisitor):

    def __init__(self, builder: ExprBuilder, **kwargs):
        super().__init__(**kwargs)
        self.builder = builder

    def visit__default__(self, node, children):
        if isinstance(node, Terminal):
            return node.value
        return list(children)

    def visit_scalar(self, node, children):
        return _NodeRef(self.builder.const(ExactScalar.parse(node.value)))

    def visit_variable(self, node, children):
        name = node.value
        return _NodeRef(self.builder.var(_LETTERS[name] if name in _LETTERS else int(name[1:])))

    def visit_inverse(self, node, children):
        (inner,) = _flatten(children)
        return _NodeRef(self.builder.inv(inner.id))

    def visit_group(self, node, children):
        return _flatten(children)[0]

    def visit_factor(self, node, children):
        return _flatten(children)[0]

    def visit_term(self, node, children):
        items = _flatten(children)
        negate = isinstance(items[0], str) and items[0] == '-'
        refs = [item for item in items if isinstance(item, _NodeRef)]
        # Products nest to the right: a*b*c = Mul(a, Mul(b, c))
        acc = refs[-1].id
        for ref in reversed(refs[:-1]):
            acc = self.builder.mul(ref.id, acc)
        return _NodeRef(self.builder.neg(acc) if negate else acc)

    def visit_expression(self, node, children):
        items = _flatten(children)
        acc, op = items[0].id, None
        for item in items[1:]:
            if isinstance(item, str):
                op = item
            elif op == '-':
                acc = self.builder.sub(acc, item.id)
            else:
                acc = self.builder.add(acc, item.id)
        return _NodeRef(acc)

    def visit_source(self, node, children):
        return _flatten(children)[0]


@lru_cache(maxsize=1)
def _expr_parser() -> ParserPython:
    return ParserPython(source, skipws=True)


def parse(text: str, nvars: Optional[int] = None) -> RatExpr:
    """Parse expression text into a hash-consed DAG"""

    parser = _expr_parser()
    try:
        tree = parser.parse(text)
    except NoMatch as e:
        line, column = parser.pos_to_linecol(e.position)
        raise ExpressionSyntaxError(f"Syntax error at line {line}, column {column} in {text!r}",
                                    e.position, line, column) from e
    builder = ExprBuilder()
    root = visit_parse_tree(tree, _ExprVisitor(builder))
    return builder.build(_flatten([root])[0].id, nvars)


def _const_text(value: ExactScalar) -> str:
    text = value.to_text()
    if text.startswith('-') or (value.real != 0 and value.imag != 0):
        return f"({text})"
    return text


def to_text(r: RatExpr, node: Optional[int] = None) -> str:
    """Pretty printer whose output parses back to the same DAG

    Each reachable node is rendered once, children before parents.
    """

    target = r.root if node is None else node
    reachable, stack = set(), [target]
    while stack:
        i = stack.pop()
        if i not in reachable:
            reachable.add(i)
            stack.extend(_children(r.nodes[i]))

    texts: Dict[int, str] = {}
    for i in sorted(reachable):
        n = r.nodes[i]
        if isinstance(n, Const):
            texts[i] = _const_text(n.value)
        elif isinstance(n, Var):
            texts[i] = f"x{n.index}"
        elif isinstance(n, Inv):
            texts[i] = f"inv({texts[n.child]})"
        elif isinstance(n, Add):
            right = texts[n.right]
            if isinstance(r.nodes[n.right], Add):
                right = f"({right})"
            texts[i] = f"{texts[n.left]} + {right}"
        else:
            left, right = texts[n.left], texts[n.right]
            if isinstance(r.nodes[n.left], (Add, Mul)):
                left = f"({left})"
            if isinstance(r.nodes[n.right], Add):
                right = f"({right})"
            texts[i] = f"{left}*{right}"
    return texts[target]


def expr_from_poly(a: NCPoly) -> RatExpr:
    """Sum-of-products expression of a polynomial"""

    builder = ExprBuilder()
    root = None
    for word, coeff in a.terms:
        if word:
            prod = builder.var(word[-1])
            for letter in reversed(word[:-1]):
                prod = builder.mul(builder.var(letter), prod)
            summand = prod if coeff == ONE else builder.mul(builder.const(coeff), prod)
        else:
            summand = builder.const(coeff)
        root = summand if root is None else builder.add(root, summand)
    if root is None:
        root = builder.const(ZERO)
    return builder.build(root, a.nvars)


def expr_to_json(r: RatExpr) -> Dict:
    nodes = []
    for node in r.nodes:
        if isinstance(node, Const):
            nodes.append({"op": "const", "value": scalar_to_json(node.value)})
        elif isinstance(node, Var):
            nodes.append({"op": "var", "index": node.index})
        elif isinstance(node, Add):
            nodes.append({"op": "add", "left": node.left, "right": node.right})
        elif isinstance(node, Mul):
            nodes.append({"op": "mul", "left": node.left, "right": node.right})
        else:
            nodes.append({"op": "inv", "child": node.child})
    return {"nodes": nodes, "root": r.root, "nvars": r.nvars, "text": to_text(r)}


# Evaluation

def _check_invertible(M: np.ndarray, tol: float, node: Optional[int], scale: float = 0.0):
    # scale: magnitude of the operands M was computed from, so cancellation to roundoff counts as singular
    s = np.linalg.svd(M, compute_uv=False)
    reference = max(s[0], scale) if s.size else 0.0
    if s.size and (reference == 0 or s[-1] <= tol * reference):
        cond = np.inf if s[-1] == 0 else reference / s[-1]
        raise DomainError(f"Inverse of a matrix with condition number {cond:.3g} at node {node}", node, cond)


def eval_dag(r: RatExpr, X: MatrixTuple, tol: float = DOMAIN_TOL) -> np.ndarray:
    """Bottom-up evaluation; Inv of a child with condition number above 1/tol raises DomainError"""

    if X.n < r.nvars:
        raise DimensionMismatchError(f"Expression in {r.nvars} variables evaluated at a {X.n}-tuple")
    d = X.dim
    values: Dict[int, np.ndarray] = {}
    scales: Dict[int, float] = {}
    for i, node in enumerate(r.nodes):
        if isinstance(node, Const):
            values[i] = complex(node.value) * np.eye(d, dtype=complex)
        elif isinstance(node, Var):
            values[i] = X.mats[node.index - 1]
        elif isinstance(node, Add):
            values[i] = values[node.left] + values[node.right]
            scales[i] = max(scales[node.left], scales[node.right])
        elif isinstance(node, Mul):
            values[i] = values[node.left] @ values[node.right]
            scales[i] = scales[node.left] * scales[node.right]
        else:
            child = values[node.child]
            _check_invertible(child, tol, i, scales[node.child])
            values[i] = np.linalg.inv(child)
        scales[i] = max(scales.get(i, 0.0), float(np.linalg.norm(values[i], 2)) if d else 0.0)
    return values[r.root]


# Linearization

@dataclass(frozen=True, eq=False)
class FormalLinearRep:
    """r = u * A^{-1} * v with exact border vectors"""
    u: np.ndarray
    A: LinearPencil
    v: np.ndarray

    @property
    def dimension(self) -> int:
        return self.A.N

    def u_complex(self) -> np.ndarray:
        return ExactLinalg.to_complex(self.u)

    def v_complex(self) -> np.ndarray:
        return ExactLinalg.to_complex(self.v)

    def evaluate(self, X: MatrixTuple, tol: float = DOMAIN_TOL) -> np.ndarray:
        """u (x) 1 * A(X)^{-1} * v (x) 1, DomainError when A(X) is numerically singular"""
        k, d = self.dimension, X.dim
        M = self.A.evaluate(X)
        _check_invertible(M, tol, None)
        right = np.kron(self.v_complex().reshape(k, 1), np.eye(d))
        left = np.kron(self.u_complex().reshape(1, k), np.eye(d))
        return left @ np.linalg.solve(M, right)

    def to_json(self) -> Dict:
        out = pencil_to_json(self.A)
        out["u"] = [scalar_to_json(z) for z in self.u]
        out["v"] = [scalar_to_json(z) for z in self.v]
        return out


@dataclass
class _Block:
    u: np.ndarray
    mats: List[np.ndarray]
    v: np.ndarray

    @property
    def k(self) -> int:
        return len(self.u)


def _vector(values) -> np.ndarray:
    return np.array([ExactScalar.of(x) for x in values], dtype=object)


def _atom(n: int, const: ExactScalar, var: Optional[int]) -> _Block:
    # ((0 1), [[-lam, 1], [1, 0]] - x_j e11, (0 1)^t)
    mats = [ExactLinalg.zeros(2, 2) for _ in range(n + 1)]
    mats[0][0, 0] = -const
    mats[0][0, 1] = ONE
    mats[0][1, 0] = ONE
    if var is not None:
        mats[var][0, 0] = -ONE
    return _Block(_vector([0, 1]), mats, _vector([0, 1]))


def _direct_sum(a: _Block, b: _Block) -> _Block:
    k = a.k + b.k
    mats = []
    for Ma, Mb in zip(a.mats, b.mats):
        M = ExactLinalg.zeros(k, k)
        M[:a.k, :a.k] = Ma
        M[a.k:, a.k:] = Mb
        mats.append(M)
    return _Block(np.concatenate([a.u, b.u]), mats, np.concatenate([a.v, b.v]))


def _product(a: _Block, b: _Block) -> _Block:
    # [[-v1 u2, A1], [A2, 0]] with u = (0, u1), v = (0, v2)
    k1, k2 = a.k, b.k
    k = k1 + k2
    mats = []
    for idx, (Ma, Mb) in enumerate(zip(a.mats, b.mats)):
        M = ExactLinalg.zeros(k, k)
        M[:k1, k2:] = Ma
        M[k1:, :k2] = Mb
        if idx == 0:
            M[:k1, :k2] = -ExactLinalg.matmul(a.v.reshape(k1, 1), b.u.reshape(1, k2))
        mats.append(M)
    u = np.concatenate([_vector([0] * k2), a.u])
    v = np.concatenate([_vector([0] * k1), b.v])
    return _Block(u, mats, v)


def _inverse(a: _Block) -> _Block:
    # [[0, u], [-v, A]] with u = v = e1
    k = a.k + 1
    mats = []
    for idx, Ma in enumerate(a.mats):
        M = ExactLinalg.zeros(k, k)
        M[1:, 1:] = Ma
        if idx == 0:
            M[0, 1:] = a.u
            M[1:, 0] = -a.v
        mats.append(M)
    e1 = _vector([1] + [0] * a.k)
    return _Block(e1, mats, e1.copy())


def linearize(r: RatExpr) -> FormalLinearRep:
    """Formal linear representation by structural recursion over the DAG"""

    n = r.nvars
    blocks: Dict[int, _Block] = {}
    for i, node in enumerate(r.nodes):
        if isinstance(node, Const):
            blocks[i] = _atom(n, node.value, None)
        elif isinstance(node, Var):
            blocks[i] = _atom(n, ZERO, node.index)
        elif isinstance(node, Add):
            blocks[i] = _direct_sum(blocks[node.left], blocks[node.right])
        elif isinstance(node, Mul):
            blocks[i] = _product(blocks[node.left], blocks[node.right])
        else:
            blocks[i] = _inverse(blocks[node.child])
    top = blocks[r.root]
    logger.debug(f"Linearized expression with {len(r.nodes)} nodes into dimension {top.k}")
    return FormalLinearRep(top.u, LinearPencil.from_exact(top.mats), top.v)


def _block_of(rep: FormalLinearRep, nvars: int) -> _Block:
    return _Block(np.asarray(rep.u, dtype=object), list(rep.A.with_nvars(nvars).exact_coeffs()),
                  np.asarray(rep.v, dtype=object))


def _rep_of(block: _Block) -> FormalLinearRep:
    return FormalLinearRep(block.u, LinearPencil.from_exact(block.mats), block.v)


def rep_sum(a: FormalLinearRep, b: FormalLinearRep) -> FormalLinearRep:
    n = max(a.A.n, b.A.n)
    return _rep_of(_direct_sum(_block_of(a, n), _block_of(b, n)))


def rep_product(a: FormalLinearRep, b: FormalLinearRep) -> FormalLinearRep:
    n = max(a.A.n, b.A.n)
    return _rep_of(_product(_block_of(a, n), _block_of(b, n)))


def rep_inverse(a: FormalLinearRep) -> FormalLinearRep:
    return _rep_of(_inverse(_block_of(a, a.A.n)))


def rep_scale(a: FormalLinearRep, c: ScalarLike) -> FormalLinearRep:
    """c*r by scaling the left border; A is shared"""
    c = ExactScalar.of(c)
    return FormalLinearRep(np.array([c * x for x in a.u], dtype=object), a.A, a.v)


def expected_dimension(r: RatExpr) -> int:
    """Dimension the rules produce: leaves give 2, sums and products add, inverses add one"""

    dims: Dict[int, int] = {}
    for i, node in enumerate(r.nodes):
        if isinstance(node, (Const, Var)):
            dims[i] = 2
        elif isinstance(node, (Add, Mul)):
            dims[i] = dims[node.left] + dims[node.right]
        else:
            dims[i] = dims[node.child] + 1
    return dims[r.root]


def rep_eval_consistency(r: RatExpr, rep: FormalLinearRep, X: MatrixTuple, tol: float = CONSISTENCY_TOL,
                         domain_tol: float = DOMAIN_TOL) -> bool:
    """Compare u*A(X)^{-1}*v with the DAG value; DomainError propagates"""

    expected = eval_dag(r, X, domain_tol)
    got = rep.evaluate(X, domain_tol)
    error = np.linalg.norm(got - expected)
    ok = error <= tol * (1 + np.linalg.norm(expected))
    if not ok:
        logger.warning(f"Representation disagrees with the expression by {error:.3e}")
    return bool(ok)


def random_expression(nvars: int, depth: int, rng: np.random.Generator, inverse_rate: float = 0.2) -> RatExpr:
    """Random expression tree of bounded depth, used by property tests and the harness"""

    builder = ExprBuilder()

    def grow(level: int) -> int:
        if level == 0 or rng.random() < 0.25:
            if rng.random() < 0.75:
                return builder.var(int(rng.integers(1, nvars + 1)))
            return builder.const(int(rng.integers(-3, 4)))
        roll = rng.random()
        if roll < inverse_rate:
            return builder.inv(grow(level - 1))
        if roll < inverse_rate + (1 - inverse_rate) / 2:
            return builder.add(grow(level - 1), grow(level - 1))
        return builder.mul(grow(level - 1), grow(level - 1))

    return builder.build(grow(depth), nvars)
