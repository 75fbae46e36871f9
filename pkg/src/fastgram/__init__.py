"""Grammar compilers and production machines for fast grammar fuzzing."""

from .analysis import AnalyzedGrammar, analyze, compute_pools, mu_depth
from .choice import ChoiceStream, make_stream
from .grammar import Grammar, GrammarError, load_grammar, load_grammar_file, unroll, validate
from .report import ProductionConfig, RunReport

__version__ = "0.1.0"
