"""Service modules: parsing, checks, semantics and model checking."""

from src.services.compiler import compile_to_pdmp, run_compiled
from src.services.deterministic import evaluate
from src.services.parser import parse_crn, parse_predicate, parse_protocol, parse_template
from src.services.pdmp_engine import execute
from src.services.smc import estimate, run_ensemble, sweep
from src.services.stochastic import eval_stoch

__all__ = [
    "compile_to_pdmp",
    "estimate",
    "eval_stoch",
    "evaluate",
    "execute",
    "parse_crn",
    "parse_predicate",
    "parse_protocol",
    "parse_template",
    "run_compiled",
    "run_ensemble",
    "sweep",
]
