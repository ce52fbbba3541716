"""Tracking-adaptive objectness: BING-style window scoring adapted online to a tracked target."""
from .adaptation import AnnotatedFrame, SampleSpec, adapt_objectness, generate_samples
from .adasvm import AdaSvmConfig, TrainingSet, fit
from .bing import LinearModel, default_base_model, objectness_map
from .imaging import BBox, GrayImage, read_image
from .tracking import FusionConfig, track_sequence

__version__ = "0.1.0"
