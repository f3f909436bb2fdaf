# Simulation designs and the Monte Carlo harness
