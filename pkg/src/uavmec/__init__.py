"""UAV-mounted edge computing: online control simulator and optimization library.

Simulates a rotary-wing UAV serving mobile ground users over a probabilistic
line-of-sight channel.  A per-slot drift-plus-penalty controller trades user
energy against queue backlogs under a long-run UAV propulsion-energy budget;
the per-slot joint trajectory/resource problem is solved by successive convex
approximation over a log-barrier Newton core.  Center-tracking baselines
("go", "ge") are included for comparison.
"""

from .config import ScenarioConfig, ConfigError, load_config, default_config
from .episode import EpisodeTrace, EpisodeError, run_episode, moving_average, sample_arrivals

__all__ = [
    "ScenarioConfig",
    "ConfigError",
    "load_config",
    "default_config",
    "EpisodeTrace",
    "EpisodeError",
    "run_episode",
    "moving_average",
    "sample_arrivals",
]

__version__ = "0.1.0"
