# Numerical modules: signals, forcing classes, gallery, solvers, compactness
