"""mlakit: multi-threshold interval decomposition of 1-D signals.

The toolkit turns a signal into per-threshold interval lists and builds
everything else on top of that representation: nested-pattern discovery
and nucleosome region classification, a Gaussian-emission HMM baseline,
a Monte-Carlo randomness test on interval-length distributions, interval
tree and convolution kernels with an SMO-trained SVM and one-class KNN,
plus a batch CLI wiring it all together.
"""

from .signals import (
    Signal,
    correlation,
    disambiguate,
    min_lossless_thresholds,
    normalize_unit,
    smooth3,
)
from .transform import (
    Interval,
    IntervalRepresentation,
    calibrate_k,
    horizontal_sampling,
    interval_count_bound,
    reconstruct,
)

__version__ = "0.1.0"

__all__ = [
    "Signal",
    "correlation",
    "disambiguate",
    "min_lossless_thresholds",
    "normalize_unit",
    "smooth3",
    "Interval",
    "IntervalRepresentation",
    "calibrate_k",
    "horizontal_sampling",
    "interval_count_bound",
    "reconstruct",
    "__version__",
]
