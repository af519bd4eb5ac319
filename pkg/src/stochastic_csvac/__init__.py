"""
Stochastic CSVAC

A simulator and optimizer for mesoscopic transistor voltage amplifiers built on
stochastic thermodynamics: single-level transistors, the complementary symmetric
voltage amplifier circuit (CSVAC), its power dissipation, and the power-optimal
multistage gain decomposition.
"""

__version__ = "0.1.0"
