"""Desk-scale video-language pipeline.

Frame sampling and mock encoding, three temporal token aggregators with
analytic gradients, video-token assembly and projection, conversation
templating, caption-corpus filtering, instruction-data generation, a toy
two-stage training loop, and a chat-model-as-judge evaluation harness.
"""

__version__ = "0.1.0"
