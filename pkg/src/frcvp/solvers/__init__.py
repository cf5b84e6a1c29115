from .bnb import BnBResult, SearchStats, branch_and_bound
from .enumerate import EnumerationResult, best_assignment, exact_enumerate
from .simplex import LpSolution, simplex_solve, solve_form

__all__ = ["BnBResult", "SearchStats", "branch_and_bound", "EnumerationResult", "best_assignment",
           "exact_enumerate", "LpSolution", "simplex_solve", "solve_form"]
