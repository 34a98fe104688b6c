"""LoRA fine-tuning trainer.

Consumes a training-set file plus a hyperparameter manifest, produces
per-epoch adapter checkpoints, per-token cross-entropy logs over test
questions, and greedy-decoded answer files. All communication with the
orchestrating pipeline happens through these plain files.
"""
