# Degradation package
