"""Anterior chamber cell detection pipeline.

Zero-shot chamber segmentation via prompt generation over a promptable
segmenter backend, followed by cell detection with a scaled automatic
threshold, component analysis inside the chamber mask, and a learned
false-positive filter.
"""

from .backends import (ExternalProcessSegmenter, MaskCandidate, OracleSegmenter,
                       PromptableSegmenter, SegmenterOutput, rle_decode, rle_encode)
from .chamber import (ChamberMask, ChamberSegmenter, PromptSet, anterior_segment_mask,
                      generate_prompts, segment_chamber, select_chamber_mask)
from .classifier import (CellCropClassifier, MlpParams, TrainConfig, TrainReport,
                         load_params, save_params)
from .detection import (AlphaSearchReport, CandidateBox, CdmConfig, CellDetector, Crop,
                        Detection, DetectionSample, detect_candidates, detect_cells,
                        extract_crop, label_crop, search_alpha)
from .errors import AccellError
from .imaging import (Component, ComponentSet, binarize, connected_components,
                      filter_by_area, to_grayscale)
from .metrics import (BoxConfusion, DetectionScores, box_scores, dice, image_scores,
                      iou, match_boxes)
from .phantom import (DatasetManifest, GroundTruth, PhantomConfig, SplitSpec,
                      generate_dataset, generate_phantom, load_manifest, split)
from .pipeline import BackendConfig, RunConfig, compute_chambers, run_protocol
from .thresholding import ThresholdResult, adjusted_cutoff, isodata_threshold, mean_intensity

__version__ = "0.1.0"
