"""CVaR-constrained blackbox optimization by multi-timescale stochastic approximation."""
