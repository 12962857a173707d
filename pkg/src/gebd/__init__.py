"""Generic event boundary detection toolkit.

Library surface:

* :mod:`gebd.annotations` - annotation model, parsing, annotator consistency,
  ground-truth selection
* :mod:`gebd.evaluation` - boundary matching and precision/recall/F1 metrics
* :mod:`gebd.flow` - dense optical flow via polynomial expansion
* :mod:`gebd.windows` - candidate timestamps and RGB/flow window extraction
* :mod:`gebd.classifier` - hand-crafted features and the logistic boundary
  classifier
* :mod:`gebd.postprocess` - score smoothing and peak detection
* :mod:`gebd.container` - "GEBT" binary tensor files
* :mod:`gebd.report` - SVG timelines and per-class bar charts
* :mod:`gebd.synth` - synthetic desk-scale corpus generator
* :mod:`gebd.pipeline` - staged, resumable end-to-end driver (also via the
  ``gebd`` command line tool)
"""

__version__ = "0.1.0"

from .annotations import (  # noqa: F401
    AnnotationSet,
    AnnotatorTrack,
    BoundaryList,
    RawBoundary,
    VideoMeta,
    compute_f1_consistency,
    load_annotations,
    normalize_track,
    parse_annotations,
    select_gt_highest,
    select_gt_weighted,
    serialize_annotations,
)
from .evaluation import (  # noqa: F401
    EvalReport,
    MatchResult,
    PRF,
    absolute_window_match,
    evaluate_corpus,
    f1_from_pr,
    match_boundaries,
    per_class_report,
    prf_from_match,
    rel_dis,
    sweep_thresholds,
)
from .flow import (  # noqa: F401
    FlowConfig,
    farneback_flow,
    flow_stats,
    gaussian_pyramid,
    poly_expansion,
    to_gray,
)
