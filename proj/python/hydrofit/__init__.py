"""Volume-flow-pressure model identification for hydraulic soft actuators.

Thin wrapper over the C++ core. The main entry points:

    generate(truth, protocol)   synthetic bench datasets
    fit(dataset, spec, config)  exponential / polynomial / NN families
    score(model, dataset)       RMSE, adjusted R^2, AICc, BIC
    pca / correlations          preliminary analysis
    stiffness_damping, chow_test, estimate_force
"""

from ._hydrofit import *  # noqa: F401,F403
from ._hydrofit import __version__  # noqa: F401
