"""Inductive Logic Boosting: boosted relational rule trees that export as Problog programs."""

from .boost import BoostedModel, predict, predict_margins, render_program, train
from .config import Config, load_config
from .instances import ExampleSet, generate_instances
from .logic import Atom, Clause, Conjunction, FactBase, Var, parse_atoms, parse_clause, parse_facts
from .metrics import auc_pr, auc_roc, closed_world
from .tree import extract_rules, learn_tree, noisy_or

__version__ = "0.1.0"
