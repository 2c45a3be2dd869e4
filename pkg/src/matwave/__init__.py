"""Matrix-argument wavelet, Riesz potential and Radon transform toolkit."""
