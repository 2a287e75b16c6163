"""Toolkit for experimental protocols over chemical reaction networks.

Protocols are parsed, checked and evaluated against a network's rate
equations, either deterministically or under a noise model, and their
stochastic behaviour is estimated by statistical model checking.
"""

__version__ = "1.0.0"
