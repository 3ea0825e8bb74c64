"""Radio landscape sensing toolkit.

Synthesizes landscape scenes and base-station deployments, simulates
per-link path-gains, builds dominant-path training sets and trains/evaluates
a from-scratch random-forest detector that infers the landscape around a UE
from the N strongest path-gains.
"""

__version__ = "0.1.0"

from ._kernels import BACKEND as KERNEL_BACKEND  # noqa: E402

__all__ = ["__version__", "KERNEL_BACKEND"]
