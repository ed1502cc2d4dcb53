"""Lyapunov function synthesis for systems with distributional uncertainty.

Modules
-------
poly         sparse multivariate polynomials
sos          sum-of-squares programs compiled to SDPs
sdp          primal-dual interior-point SDP solver
uncertainty  constraint function, empirical CVaR, Wasserstein DRCC margin
synth        SOS Lyapunov synthesis (baseline, CC, DRCC)
nnlf         neural-network Lyapunov candidates and training
bench        benchmark systems and disturbance sampling
validate     Monte Carlo violation rate and area
cli          command-line front end
"""

from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
