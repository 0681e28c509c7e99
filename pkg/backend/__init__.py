"""Backend package for the entangled-pair measurement simulator (spin algebra, sampling, photon optics)."""
