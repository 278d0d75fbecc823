# Losses package
