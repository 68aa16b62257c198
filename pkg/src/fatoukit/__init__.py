"""Finite-stage polynomial constructions with certified Fatou-component behavior.

Submodules:

* :mod:`fatoukit.geometry`: regions, continua, exhaustions, disk schedules;
* :mod:`fatoukit.polynomial` and :mod:`fatoukit.approx`: Newton-form
  polynomials and the simultaneous approximation engine;
* :mod:`fatoukit.construct`: the staged builds (oscillating, invariant, Baker);
* :mod:`fatoukit.dynamics` and :mod:`fatoukit.certify`: orbit checks and reports;
* :mod:`fatoukit.conformal`: closed-form conformal maps for the Baker model;
* :mod:`fatoukit.cli`: the ``fatoukit`` command.
"""
from __future__ import annotations

from .approx import CompactTarget, HermiteConstraint, certified_sup_error, simultaneous_approximate, stability_budget
from .certify import certify_build
from .conformal import ConformalMap, make_baker_model
from .construct import (Build, ConstructionError, StagePlan, build_baker, build_invariant, build_oscillating,
                        make_invariant_target, prepare_baker, prepare_invariant, prepare_oscillating)
from .dynamics import escape_grid, orbit, verify_absorbing, verify_univalence
from .geometry import Continuum, Disk, PointRegion, PolygonRegion, Rect, hausdorff_distance
from .polynomial import PolynomialMap
from .report import VerificationReport

__all__ = [
    "Build", "CompactTarget", "ConformalMap", "ConstructionError", "Continuum", "Disk", "HermiteConstraint",
    "PointRegion", "PolygonRegion", "PolynomialMap", "Rect", "StagePlan", "VerificationReport",
    "build_baker", "build_invariant", "build_oscillating", "certified_sup_error", "certify_build",
    "escape_grid", "hausdorff_distance", "make_baker_model", "make_invariant_target", "orbit",
    "prepare_baker", "prepare_invariant", "prepare_oscillating", "simultaneous_approximate",
    "stability_budget", "verify_absorbing", "verify_univalence",
]
