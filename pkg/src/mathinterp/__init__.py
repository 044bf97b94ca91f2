"""Interpretability tooling for LLM-generated step-by-step math solutions.

Two complementary analyses are provided:

* reasoning-flow extraction (:mod:`mathinterp.flow`), which turns a solution
  into an annotated directed graph of steps, and
* prompt ablation (:mod:`mathinterp.ablation`, :mod:`mathinterp.divergence`,
  :mod:`mathinterp.metrics`), which measures how much each element of the
  question drives the model's answer.
"""

from mathinterp.errors import MathInterpError

__version__ = "0.1.0"

__all__ = ["MathInterpError", "__version__"]
