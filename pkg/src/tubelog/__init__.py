"""Decomposition of the sphere under a primitive of a rational 1-form.

The pipeline turns R(z) dz into its flat-surface blueprint: pole petals
mapped to half-cylinders, a greedy tree of minimizing geodesic cuts between
the zeroes, and the developed polygon with side identifications.
"""

from .errors import (FormNotRegularError, FormSyntaxError, NonGenericError,
                     NumericalError, TubelogError)
from .ratform import (GenericityReport, Polynomial, RationalForm,
                      analyze_rational, check_generic, eval_form, find_roots,
                      form_from_json, from_poles_residues, parse_form,
                      random_generic_form, residues)

__version__ = "0.1.0"
