"""Generalized-P stochastic model: drift, noise factorization, RNG and integrators."""
