"""Static checks of candidate source against the Net API contract.

Rules (error severity unless noted):

    NET_CLASS         exactly one class Net subclassing the nn module base
    CTOR_SIG          __init__(self, in_shape, out_shape, prm, device);
                      extra keyword-only params with defaults downgrade to warning
    METHODS           train_setup, learn, forward defined on Net
    HYPERPARAMS       top-level supported_hyperparameters() returning {'lr', 'momentum'}
    FORBIDDEN_IDENT   no identifier from the deny-list (default: SelfAttention)
    VOCAB_TO_DECODER  no transformer-decoder construction taking vocab_size
    TUPLE_RETURN      every return in forward is a two-element tuple expression
    IGNORE_INDEX      (warning) a CrossEntropyLoss construction lacks ignore_index=0

Shape verification at runtime belongs to the sandbox runner; these checks are
purely syntactic.
"""

import ast
from dataclasses import dataclass, field

from .recovery import CandidateSource, SyntaxFailure

RULES_VERSION = "v1"

NET_CLASS = "NET_CLASS"
CTOR_SIG = "CTOR_SIG"
METHODS = "METHODS"
HYPERPARAMS = "HYPERPARAMS"
FORBIDDEN_IDENT = "FORBIDDEN_IDENT"
VOCAB_TO_DECODER = "VOCAB_TO_DECODER"
TUPLE_RETURN = "TUPLE_RETURN"
IGNORE_INDEX = "IGNORE_INDEX"

SEVERITY_ERROR = "error"
SEVERITY_WARNING = "warning"

DEFAULT_DENY_LIST = ("SelfAttention",)

REQUIRED_CTOR_PARAMS = ["self", "in_shape", "out_shape", "prm", "device"]
REQUIRED_METHODS = ("train_setup", "learn", "forward")

_TRANSFORMER_DECODER_NAMES = {"TransformerDecoder", "TransformerDecoderLayer", "Transformer"}
_TRANSFORMER_MARKERS = _TRANSFORMER_DECODER_NAMES | {"MultiheadAttention"}
_LSTM_MARKERS = {"LSTM", "LSTMCell"}
_GRU_MARKERS = {"GRU", "GRUCell"}

DECODER_LSTM = "LSTM"
DECODER_GRU = "GRU"
DECODER_TRANSFORMER = "Transformer"
DECODER_UNKNOWN = "Unknown"


@dataclass(frozen=True)
class Violation:
    rule_id: str
    severity: str
    line: int
    column: int
    message: str
    identifier: str | None = None


@dataclass
class ContractReport:
    violations: list[Violation] = field(default_factory=list)
    passed: bool = True
    decoder_type: str = DECODER_UNKNOWN

    def errors(self) -> list[Violation]:
        return [v for v in self.violations if v.severity == SEVERITY_ERROR]


def _terminal_name(node: ast.expr) -> str | None:
    if isinstance(node, ast.Attribute):
        return node.attr
    if isinstance(node, ast.Name):
        return node.id
    return None


def _subclasses_module(cls: ast.ClassDef) -> bool:
    return any(_terminal_name(base) == "Module" for base in cls.bases)


def _own_statements(func: ast.FunctionDef):
    """Walk a function body without descending into nested defs or lambdas."""
    stack = list(func.body)
    while stack:
        node = stack.pop(0)
        yield node
        if isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef, ast.Lambda, ast.ClassDef)):
            continue
        stack = [child for child in ast.iter_child_nodes(node)] + stack


def _literal_hyperparameters(func: ast.FunctionDef) -> bool:
    body = func.body
    if body and isinstance(body[0], ast.Expr) and isinstance(body[0].value, ast.Constant):
        body = body[1:]  # tolerate a docstring
    if len(body) != 1 or not isinstance(body[0], ast.Return):
        return False
    value = body[0].value
    if not isinstance(value, ast.Set) or len(value.elts) != 2:
        return False
    literals = {elt.value for elt in value.elts if isinstance(elt, ast.Constant)}
    return literals == {"lr", "momentum"}


def classify_decoder(source: CandidateSource | str) -> str:
    """Transformer beats recurrent; between LSTM and GRU the first constructed wins."""
    text = source.text if isinstance(source, CandidateSource) else source
    tree = ast.parse(text)
    recurrent: list[tuple[int, int, str]] = []
    for node in ast.walk(tree):
        if not isinstance(node, ast.Call):
            continue
        name = _terminal_name(node.func)
        if name in _TRANSFORMER_MARKERS:
            return DECODER_TRANSFORMER
        if name in _LSTM_MARKERS:
            recurrent.append((node.lineno, node.col_offset, DECODER_LSTM))
        elif name in _GRU_MARKERS:
            recurrent.append((node.lineno, node.col_offset, DECODER_GRU))
    if recurrent:
        return min(recurrent)[2]
    return DECODER_UNKNOWN


def check(source: CandidateSource | str, deny_list: tuple[str, ...] = DEFAULT_DENY_LIST) -> ContractReport:
    """Evaluate every contract rule over parsed candidate source."""
    text = source.text if isinstance(source, CandidateSource) else source
    try:
        tree = ast.parse(text)
    except SyntaxError as exc:
        raise ValueError(f"source does not parse (line {exc.lineno}): run the sanitizer first") from exc

    violations: list[Violation] = []

    def add(rule, line, column, message, identifier=None, severity=SEVERITY_ERROR):
        violations.append(Violation(rule, severity, line, column, message, identifier))

    net_classes = [n for n in tree.body if isinstance(n, ast.ClassDef) and n.name == "Net"]
    net = net_classes[0] if net_classes else None
    if not net_classes:
        add(NET_CLASS, 1, 0, "no top-level class Net defined")
    elif len(net_classes) > 1:
        add(NET_CLASS, net_classes[1].lineno, net_classes[1].col_offset, "more than one class Net defined")
    elif not _subclasses_module(net):
        add(NET_CLASS, net.lineno, net.col_offset, "class Net does not subclass nn.Module")

    if net is not None:
        methods = {
            n.name: n for n in net.body if isinstance(n, ast.FunctionDef)
        }
        ctor = methods.get("__init__")
        if ctor is None:
            add(CTOR_SIG, net.lineno, net.col_offset, "class Net has no __init__")
        else:
            names = [a.arg for a in ctor.args.posonlyargs + ctor.args.args]
            if names != REQUIRED_CTOR_PARAMS:
                add(
                    CTOR_SIG,
                    ctor.lineno,
                    ctor.col_offset,
                    f"__init__ parameters must be exactly {REQUIRED_CTOR_PARAMS}, got {names}",
                )
            elif ctor.args.vararg or ctor.args.kwarg:
                add(CTOR_SIG, ctor.lineno, ctor.col_offset, "__init__ must not take *args or **kwargs")
            elif ctor.args.kwonlyargs:
                missing_default = [
                    a.arg for a, d in zip(ctor.args.kwonlyargs, ctor.args.kw_defaults) if d is None
                ]
                if missing_default:
                    add(
                        CTOR_SIG,
                        ctor.lineno,
                        ctor.col_offset,
                        f"keyword-only __init__ parameters without defaults: {missing_default}",
                    )
                else:
                    add(
                        CTOR_SIG,
                        ctor.lineno,
                        ctor.col_offset,
                        "extra keyword-only __init__ parameters (tolerated)",
                        severity=SEVERITY_WARNING,
                    )

        for method in REQUIRED_METHODS:
            if method not in methods:
                add(
                    METHODS,
                    net.lineno,
                    net.col_offset,
                    f"class Net is missing method '{method}'",
                    identifier=method,
                )

        forward = methods.get("forward")
        if forward is not None:
            returns = [n for n in _own_statements(forward) if isinstance(n, ast.Return)]
            if not returns:
                add(TUPLE_RETURN, forward.lineno, forward.col_offset, "forward has no return statement")
            for ret in returns:
                if not (isinstance(ret.value, ast.Tuple) and len(ret.value.elts) == 2):
                    add(
                        TUPLE_RETURN,
                        ret.lineno,
                        ret.col_offset,
                        "forward must return a two-element tuple (logits, hidden_state)",
                    )

    hyper = [
        n
        for n in tree.body
        if isinstance(n, ast.FunctionDef) and n.name == "supported_hyperparameters"
    ]
    if not hyper:
        add(HYPERPARAMS, 1, 0, "no top-level supported_hyperparameters function")
    elif not _literal_hyperparameters(hyper[0]):
        add(
            HYPERPARAMS,
            hyper[0].lineno,
            hyper[0].col_offset,
            "supported_hyperparameters must return the literal set {'lr', 'momentum'}",
        )

    deny = set(deny_list)
    for node in ast.walk(tree):
        name = None
        if isinstance(node, ast.Attribute) and node.attr in deny:
            name = node.attr
        elif isinstance(node, ast.Name) and node.id in deny:
            name = node.id
        if name is not None:
            add(
                FORBIDDEN_IDENT,
                node.lineno,
                node.col_offset,
                f"forbidden identifier '{name}' (not a real framework class)",
                identifier=name,
            )

    for node in ast.walk(tree):
        if not isinstance(node, ast.Call):
            continue
        name = _terminal_name(node.func)
        if name in _TRANSFORMER_DECODER_NAMES:
            by_keyword = any(kw.arg == "vocab_size" for kw in node.keywords)
            by_name = any(isinstance(a, ast.Name) and a.id == "vocab_size" for a in node.args)
            if by_keyword or by_name:
                add(
                    VOCAB_TO_DECODER,
                    node.lineno,
                    node.col_offset,
                    f"vocab_size must not be passed to the {name} constructor",
                    identifier=name,
                )
        elif name == "CrossEntropyLoss":
            has_ignore = any(
                kw.arg == "ignore_index" and isinstance(kw.value, ast.Constant) and kw.value.value == 0
                for kw in node.keywords
            )
            if not has_ignore:
                add(
                    IGNORE_INDEX,
                    node.lineno,
                    node.col_offset,
                    "loss construction lacks ignore_index=0 (pad token)",
                    severity=SEVERITY_WARNING,
                )

    violations.sort(key=lambda v: (v.line, v.column, v.rule_id))
    passed = not any(v.severity == SEVERITY_ERROR for v in violations)
    return ContractReport(violations=violations, passed=passed, decoder_type=classify_decoder(text))


def explain(report: ContractReport | SyntaxFailure) -> str:
    """Line-referenced plain-text feedback for the repair prompt."""
    if isinstance(report, SyntaxFailure):
        return f"- line {report.line}, column {report.column}: syntax error: {report.message}"
    if not report.violations:
        raise ValueError("explain() called on a clean report")
    return "\n".join(
        f"- line {v.line}: [{v.rule_id}] {v.message}" for v in report.violations
    )


def report_to_dict(report: ContractReport) -> dict:
    """JSON-ready shape used by the CLI and the registry."""
    return {
        "rules_version": RULES_VERSION,
        "passed": report.passed,
        "decoder_type": report.decoder_type,
        "violations": [
            {
                "rule_id": v.rule_id,
                "severity": v.severity,
                "line": v.line,
                "column": v.column,
                "message": v.message,
                "identifier": v.identifier,
            }
            for v in report.violations
        ],
    }
