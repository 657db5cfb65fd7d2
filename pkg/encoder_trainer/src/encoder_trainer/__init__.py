"""Fine-tune transformer encoders on exported stage files.

The interface to the labeling pipeline is purely file-based: this package
reads train_stage*.jsonl / eval.jsonl and writes predictions.jsonl plus a
trainer manifest. It never imports from the labeling package.
"""

from encoder_trainer.trainer import TrainerConfig, TrainerError, train_encoder

__all__ = ["TrainerConfig", "TrainerError", "train_encoder"]
__version__ = "0.1.0"
