"""Scattering engine: scales, potentials, radial solvers, exchange observables"""
