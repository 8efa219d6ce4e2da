"""Default 35-category label taxonomy (ids 0-34).

A branch's ``zone`` is the zone whose distal boundary is anchored at that
branch's ostium when building a zone map.
"""
from afx.volume_io import LabelSchema, parse_schema

DEFAULT_SCHEMA_TEXT = """\
# id role name [territory=...] [zone=N]
0  background    background
1  true-lumen    true_lumen
2  false-lumen   false_lumen
3  intimal-flap  intimal_flap
4  aortic-wall   aortic_wall
5  branch  brachiocephalic_trunk      territory=arch zone=0
6  branch  left_common_carotid        territory=arch zone=1
7  branch  left_subclavian            territory=arch zone=2
8  branch  right_subclavian           territory=arch
9  branch  right_common_carotid       territory=arch
10 branch  left_vertebral             territory=arch
11 branch  right_vertebral            territory=arch
12 branch  celiac_trunk               territory=visceral zone=5
13 branch  superior_mesenteric        territory=visceral zone=6
14 branch  left_renal                 territory=visceral zone=7
15 branch  right_renal                territory=visceral zone=7
16 branch  inferior_mesenteric        territory=visceral
17 branch  left_common_iliac          territory=visceral
18 branch  right_common_iliac         territory=visceral
19 branch  left_external_iliac        territory=visceral
20 branch  right_external_iliac       territory=visceral
21 branch  left_internal_iliac        territory=visceral
22 branch  right_internal_iliac       territory=visceral
23 branch  left_coronary              territory=arch
24 branch  right_coronary             territory=arch
25 other   false_lumen_thrombus
26 other   aortic_valve
27 other   left_ventricle
28 other   pulmonary_artery
29 other   superior_vena_cava
30 other   inferior_vena_cava
31 other   left_kidney
32 other   right_kidney
33 other   liver
34 other   spleen
"""


def default_schema() -> LabelSchema:
    return parse_schema(DEFAULT_SCHEMA_TEXT)
