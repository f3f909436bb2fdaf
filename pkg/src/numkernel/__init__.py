# Numerical kernels shared by every model fit
from src.numkernel.design import CONSTANT, COVARIATE, FITTED, TRANSFORM, DesignMatrix
from src.numkernel.glm import LOGISTIC, BinaryLink, LogisticFit, check_treatment, fit_logistic
from src.numkernel.linalg import LeastSquaresFit, detect_redundancy, solve_least_squares, solve_moment_system
from src.numkernel.newton import NewtonResult, damped_newton
from src.numkernel.pca import PCATransform, pca_filter
