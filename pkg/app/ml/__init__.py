# Numerical core: autodiff, tagger and optimizer
