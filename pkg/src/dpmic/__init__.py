"""Differentially private maximal-information statistics (MICe, MICr) and their harness."""

from dpmic.estimators import (
    CharacteristicMatrix,
    EstimatorParams,
    Family,
    MasterSizing,
    b_of,
    characteristic_entry,
    characteristic_matrix,
    mice,
    micr,
)
from dpmic.grid import (
    AxisPartition,
    CountMatrix,
    Dataset,
    Grid,
    RangeBounds,
    count_matrix,
    mass_equipartition,
    range_equipartition,
)
from dpmic.info import mutual_information, normalized_mi, optimize_axis
from dpmic.mechanisms import (
    DegenerateNoiseWarning,
    PrivacyParams,
    mice_lap,
    mice_sensitivity,
    micr_geom,
    micr_lap,
    micr_sensitivity,
    truncgeom_pmf,
    truncgeom_sample,
)

__version__ = "0.1.0"

__all__ = [
    "AxisPartition", "CharacteristicMatrix", "CountMatrix", "Dataset",
    "DegenerateNoiseWarning", "EstimatorParams", "Family", "Grid", "MasterSizing",
    "PrivacyParams", "RangeBounds", "b_of", "characteristic_entry",
    "characteristic_matrix", "count_matrix", "mass_equipartition", "mice", "mice_lap",
    "mice_sensitivity", "micr", "micr_geom", "micr_lap", "micr_sensitivity",
    "mutual_information", "normalized_mi", "optimize_axis", "range_equipartition",
    "truncgeom_pmf", "truncgeom_sample",
]
