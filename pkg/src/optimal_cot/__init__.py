"""Optimal chain-of-thought length: accuracy model, bandit, corpus and voting."""

__version__ = "0.1.0"

from .lambert import lambert_w0, lambert_wm1  # noqa: E402
from .theory import (  # noqa: E402
    TheorySetting,
    final_accuracy,
    optimal_length_closed_form,
    optimal_length_discrete,
    optimal_step_size,
)

__all__ = [
    "TheorySetting",
    "final_accuracy",
    "lambert_w0",
    "lambert_wm1",
    "optimal_length_closed_form",
    "optimal_length_discrete",
    "optimal_step_size",
]
