"""Canonical forms of brackets on phases, conjugate densities and annihilators."""

from .admissible import (AdmissibleBracket, canonical_pair, canonicalize_thm21, closed_form_check,
                         closedness_check, homotopy_one_form, lemma21_decompose,
                         lemma22_potential, one_form_from_table, phase_fieldset,
                         straighten_frame, table_from_xi, xi_from_table)
from .transform import HydroTransform, derive_inverse, remap_jacobian, transform_bracket
from .generators import (GeneratorBasis, annihilator_metric_generators, canonical_generators,
                         canonical_solution_space, is_canonical_transform, metric_solution_space,
                         span_compare, span_membership)
from .sqn import (SQNBracket, SQNReduction, canonical_form_check, classify_annihilator_part,
                  conjugated_metric, pseudo_canonicalize_thm31, reduce_to_sqn, sqn_fieldset)
from .obstruction import ObstructionVerdict, decoupling_obstruction_search
from .lagrangian import LagrangianResult, lagrangian_emit
