"""Concrete diffusion models."""

from .kramers import *  # noqa: F401,F403
from .split import SplitNonlinearModel  # noqa: F401
from .validation import cir_model, ou_exact_nll, ou_model  # noqa: F401
from .wright_fisher import *  # noqa: F401,F403
