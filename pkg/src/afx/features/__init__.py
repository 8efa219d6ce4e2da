"""Clinical features: tear location, lumen collapse, FL area ratio, branch involvement."""
from afx.features.bvi import BviRecord, classify_bvi
from afx.features.profile import CrossSectionRecord, flagged_intervals, luminal_profile, max_flar, min_tlc
from afx.features.seeds import Seeds, aortic_lumen, derive_seeds
from afx.features.tears import TearCandidate, detect_tears, primary_entry_tear
from afx.features.zones import ZoneMap, build_zone_map, classify_zone, zone_map_from_anchors

__all__ = [
    "BviRecord", "CrossSectionRecord", "Seeds", "TearCandidate", "ZoneMap",
    "aortic_lumen", "build_zone_map", "classify_bvi", "classify_zone", "derive_seeds",
    "detect_tears", "flagged_intervals", "luminal_profile", "max_flar", "min_tlc",
    "primary_entry_tear", "zone_map_from_anchors",
]
