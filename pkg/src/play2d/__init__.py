"""Learning manipulation from unstructured play in a deterministic 2D block
world: simulator, scripted demonstrators, play logs, interaction segmentation,
variational policy learning, and an evaluation harness."""

__version__ = "0.1.0"
