"""Certified piecewise-linear perturbations that avoid submanifolds."""

__version__ = "0.1.0"

from .complex import (PLMap, PLScalarField, SimplicialComplex, VertexRegion, build_complex,
                      distance_field, subdivide, urysohn)
from .avoid_core import (Certificate, avoid_zero, certify_bound, certify_nonvanishing, level_sets,
                         oracle_constant_shift, shrink)
from .charts import (AffineChart, Atlas, LipschitzTarget, StereographicChart, chart_local_avoid,
                     euclidean_point_target, euclidean_subspace_target, sphere_atlas, sphere_point_target)
from .glue import (avoid_countable_union, avoid_finite_union, glue_avoid, partition_of_unity,
                   relative_avoid)
from .bundle import BundleSpec, Section, section_avoid
from .matrix import UnitaryField, spectral_clearance, split_eigenvalues, su2_atlas

__all__ = [
    "PLMap", "PLScalarField", "SimplicialComplex", "VertexRegion", "build_complex", "distance_field",
    "subdivide", "urysohn", "Certificate", "avoid_zero", "certify_bound", "certify_nonvanishing",
    "level_sets", "oracle_constant_shift", "shrink", "AffineChart", "Atlas", "LipschitzTarget",
    "StereographicChart", "chart_local_avoid", "euclidean_point_target", "euclidean_subspace_target",
    "sphere_atlas", "sphere_point_target", "avoid_countable_union", "avoid_finite_union", "glue_avoid",
    "partition_of_unity", "relative_avoid", "BundleSpec", "Section", "section_avoid", "UnitaryField",
    "spectral_clearance", "split_eigenvalues", "su2_atlas",
]
