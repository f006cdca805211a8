"""Vehicle class recognition from roadside audio recordings."""

__version__ = "0.1.0"

from .audio_io import (AudioSignal, DataError, LabeledDataset, load_manifest,
                       load_wav, normalize, write_manifest, write_wav)
from .classify import (ClassifierSpec, NumericError, SignalPrediction,
                       classify_signal, fit_classifier, load_model, save_model)
from .evaluate import (EvaluationReport, FoldPlan, confusion_accuracy,
                       emit_report, kfold_split, run_comparison, run_cv)
from .features import (ExtractionConfig, FeatureTrack, extract_track,
                       select_high_energy, select_periodic)
from .synth import SynthSpec, generate_corpus
