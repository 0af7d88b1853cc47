"""Gumbel-softmax GAN for discrete character sequences, in plain numpy."""

__version__ = "0.1.0"
