# Autodiff package
