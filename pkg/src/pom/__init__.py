"""Piano-roll diffusion inpainting engine.

Subsystems: MIDI <-> RGB piano-roll codec (roll, smf), dataset pipeline
(dataset), Karras-space samplers and RePaint inpainting (diffusion),
denoiser models (denoisers, hourglass, training, checkpoint), mask/job
orchestration (engine), objective metrics (metrics), HTTP job service
(service, store), and a CLI (cli).
"""

__version__ = "0.1.0"

from .notes import ChordLabel, ChordSpan, ChordTrack, NoteEvent
from .roll import (decode_roll, decode_chord_color, encode_chord_color, fold,
                   render_roll, unfold)
from .smf import midi_to_notes, notes_to_midi
from .diffusion import (SigmaSchedule, add_noise, beta_from_sigma,
                        inpaint_sample, karras_schedule, sample_dpmpp_2m,
                        sample_dpmpp_2m_sde)
from .denoisers import AnalyticGaussianDenoiser, gaussian_denoise
from .engine import (GenerationJob, MaskSpec, RankedResult, rasterize_mask,
                     run_job, score_fill)
from .metrics import evaluate_dirs, hist_overlap, kde_kl

__all__ = [
    "__version__", "NoteEvent", "ChordLabel", "ChordSpan", "ChordTrack",
    "render_roll", "decode_roll", "fold", "unfold", "encode_chord_color",
    "decode_chord_color", "midi_to_notes", "notes_to_midi", "SigmaSchedule",
    "karras_schedule", "beta_from_sigma", "add_noise", "sample_dpmpp_2m",
    "sample_dpmpp_2m_sde", "inpaint_sample", "AnalyticGaussianDenoiser",
    "gaussian_denoise", "MaskSpec", "GenerationJob", "RankedResult",
    "rasterize_mask", "score_fill", "run_job", "evaluate_dirs",
    "hist_overlap", "kde_kl",
]
