"""Dynamics-centric image-to-video evaluation toolkit."""

from .frame_io import (Frame, FrameSequence, load_sequence, write_sequence,
                       downscale_for_flow, synthesize_static, synthesize_moving,
                       synthesize_warp, Translate, Zoom, Rotate, CutAt)
from .flow import (FlowField, FlowParams, GlobalMotion, estimate_flow,
                   mean_magnitude, warp_residual, fit_global_motion)
from .dynamics import DynamicsProfile, dynamic_score, is_static, pair_flows
from .quality import (QualityProfile, motion_smoothness, region_consistency,
                      naturalness, quality_profile)
from .degree import (DegreeAnnotation, DegreeAnnotator, LlmClientConfig,
                     annotate_degree, lexicon_degree)
from .bench import (BenchManifest, BenchItem, ModelReport, BenchConfig,
                    dynamic_range, dynamics_controllability, run_benchmark,
                    emit_report)
from .curation import (CurationParams, CurationVerdict, detect_cuts,
                       classify_camera_motion, curate)
from .adapter import (AdapterParams, FeatureMatrix, init_params, mca_forward,
                      mca_backward, gelu, pool_tokens)
from .diffusion import (NoiseSchedule, LatentVideo, ToyDenoiser,
                        corrupt_condition_image, build_pseudo_video,
                        concat_latents, q_sample, diffusion_loss)
from .study import (RankingRecord, StudyConfig, weight_of_rank, aggregate,
                    normalize_scores, append_store, load_store)
from .config import Config

__version__ = "0.1.0"
