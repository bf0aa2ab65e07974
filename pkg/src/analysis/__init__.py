# Numerical core: transform, likelihood, prior, synthesis and scoring
