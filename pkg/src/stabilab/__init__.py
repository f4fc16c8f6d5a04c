"""Exponential stability of nonautonomous linear systems under small perturbations.

Modules: ``linalg`` (matrix functions and norms), ``shifts`` (weighted
shifts), ``signals`` (scalar coefficient signals and their means),
``evolution`` (propagators and certificates), ``bounds`` (closed-form
robustness bounds), ``floquet`` (periodic pulse example), ``kakutani``
(switching stabilisation) and ``experiments``/``cli`` (runners).
"""
__version__ = "0.1.0"
