"""Transport maps of denoising autoencoders: analytic and mean-shift DAEs,
their flows and compositions, ridgelet networks, and trained stacks."""

from .analytic_dae import (
    collapse_time,
    continuous_dae_gaussian,
    continuous_dae_gaussian_pushforward,
    ordinary_dae_gaussian,
    ordinary_dae_gaussian_pushforward,
    ordinary_dae_gmm,
)
from .empirical_dae import MeanShiftMap, empirical_score, mean_shift_dae
from .errors import (
    CollapseError,
    ConfigError,
    DAEFlowError,
    InadmissibleError,
    NonFiniteError,
    NumericalError,
    OutOfSupportError,
    QuadratureError,
    TrainingDivergedError,
)
from .flows import (
    FlowTrajectory,
    compose_dae_gaussian,
    compose_dae_particles,
    integrate_cdae_gmm,
    integrate_cdae_particles,
    variance_decay_curves,
)
from .maps import AffineMap, ComposedMap, FunctionMap, TransportMap
from .measures import GaussianMeasure, GaussianMixture, ParticleCloud, sample
from .networks import ShallowNet
from .ridgelet import RidgeletGrid, RidgeletPair, dual_ridgelet, ridgelet_transform
from .stacking import StackedDAE, stack_daes, train_shallow_dae

__version__ = "0.1.0"
