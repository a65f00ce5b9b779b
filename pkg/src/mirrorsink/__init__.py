"""Direct position determination with a database of mirrored virtual receivers."""

__version__ = "0.1.0"

from .errors import ConfigurationError, GeometryError, MirrorsinkError, NumericalError  # noqa: E402
from .geometry import (  # noqa: E402
    AntennaArray,
    ChannelDatabase,
    Point,
    VirtualReceiver,
    Wall,
    build_database,
    build_virtual_receiver,
    mirror_point,
    rectangle_room,
    wall_ula,
)
from .signal_model import (  # noqa: E402
    SceneConfig,
    SnapshotMatrix,
    effective_steering,
    gamma_from_db,
    ideal_covariance,
    stacked_steering,
    steering_vector,
    synthesize_snapshots,
)
from .subspace import (  # noqa: E402
    Covariance,
    NoiseProjector,
    noise_projector,
    regularized_inverse,
    sample_covariance,
)
from .spectra import (  # noqa: E402
    GridSpec,
    Method,
    MethodSpec,
    SpectrumGrid,
    compute_spectrum,
    gamma_hat,
    mf_value,
    music_value,
    mvdr_value,
)
from .locator import ErrorReport, LocationEstimate, match_and_error, pick_peaks  # noqa: E402
