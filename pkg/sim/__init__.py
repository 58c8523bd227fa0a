"""Signal synthesis, Monte Carlo ensembles and bundled scenarios."""
