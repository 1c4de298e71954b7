"""Identity-preserving generative object compositing at desk scale.

A two-stage pipeline: an object encoder pretrained on multi-view pairs to
produce view-invariant conditioning tokens, and a mask-conditioned diffusion
compositor that denoises only the foreground while blending the clean
background back in at every step.
"""

__version__ = "0.1.0"
