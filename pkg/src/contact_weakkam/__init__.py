"""Numerical weak KAM toolkit for contact Hamilton-Jacobi equations H(x, u', u) = c on a circle."""
from .model import (LagrangianView, MechanicalContactHamiltonian, PRESETS, TabulatedHamiltonian,
                    TorusGrid1D, VelocityGrid, eval_hamiltonian, eval_lagrangian, verify_h3)
from .weakkam import (GridFunction, admissible_interval_probe, backward_curve, frozen_critical_value,
                      lax_oleinik_step, residual, solve_stationary)
from .measures import (DiscreteMeasure, closed_measure_lp, compare_with_measures,
                       enumerate_mather_measures, occupation_measure, ordinal_classify)
from .flows import integrate_contact, integrate_el, mather_invariance_check
from .ccurve import classify_admissible_set, scan, verify_h4
from .closed_forms import example_fig2_gbranch, fig2_solutions, u_lambda

__version__ = "0.1.0"
