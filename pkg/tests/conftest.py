import numpy as np
import pytest

from ccopt.problem import make_portfolio_problem, make_toy_problem

# paper-point constants shared across test modules
PORTFOLIO_OPT = np.array([0.0, 0.50407])
PORTFOLIO_LAM = np.array([0.0, 0.08815])
TOY_U, TOY_LAM = -2.05244, 0.877913


@pytest.fixture(scope="session")
def portfolio():
    return make_portfolio_problem()


@pytest.fixture(scope="session")
def toy():
    return make_toy_problem(pi=0.7)
