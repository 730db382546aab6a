"""Multimodal wound-type classification engine.

Image branch: wavelet-augmented vision transformer over image patches.
Location branch: transformer over a 9-bit binary encoding of the wound's
body-map location. The two latents are fused by concatenation and a
linear classifier. Swarm metaheuristics search the training
hyperparameters.
"""

__version__ = "0.1.0"
