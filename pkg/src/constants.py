"""
All analysis constants and default tuning parameters.
Modify these values to change the defaults of a run; every one of them can
also be overridden from a config file or the command line.
"""

from enum import Enum


# =============================================================================
# EVENT CLASSES
# =============================================================================
class DepthClass(Enum):
    """Depth population of an event."""
    SHALLOW = "Shallow"     # depth_km <= split
    DEEP = "Deep"           # depth_km > split


class ModeLabel(Enum):
    """Failure mode: depth half plus side of the projection threshold."""
    SHALLOW1 = "Shallow1"   # projection < threshold
    SHALLOW2 = "Shallow2"   # projection >= threshold
    DEEP1 = "Deep1"
    DEEP2 = "Deep2"

    @property
    def depth_class(self) -> DepthClass:
        return DepthClass.SHALLOW if self.value.startswith("Shallow") else DepthClass.DEEP

    @property
    def side(self) -> int:
        return int(self.value[-1])

    @classmethod
    def from_parts(cls, depth: DepthClass, side: int) -> "ModeLabel":
        return cls(f"{depth.value}{side}")


class Comparison(Enum):
    """Which contingency table a test is built from."""
    WITHIN = "WithinModes"  # A vs B
    CROSS = "CrossModes"    # C vs B
    POOLED = "Pooled"       # no mode separation


class FeatureQuality(Enum):
    """Quality flag carried by a feature vector."""
    OK = "ok"
    DEGENERATE = "degenerate"   # two eigenvalues (nearly) equal
    VERTICAL = "vertical"       # an axis has no horizontal projection


POOLED_MODE = "Pooled"

# =============================================================================
# CATALOG
# =============================================================================
NDK_LINES_PER_EVENT = 5
NDK_LINE_WIDTH = 80
MW_OFFSET = 16.1                # Mw = (2/3) * (log10(M0[dyne-cm]) - 16.1)
MW_CONSISTENCY_TOLERANCE = 0.05

MIN_MAGNITUDE = 3.05            # strict: magnitude > MIN_MAGNITUDE
DEPTH_SPLIT_KM = 200.0          # deep: depth_km > DEPTH_SPLIT_KM
SPAN_START_YEAR = 1977
SPAN_END_YEAR = 2010            # inclusive

EVENT_TABLE_COLUMNS = [
    "event_id", "origin_time", "lat", "lon", "depth_km", "mw",
    "mrr", "mtt", "mpp", "mrt", "mrp", "mtp",
]
AXES_TABLE_COLUMNS = [
    "event_id",
    "eigval1", "plunge1", "azimuth1",
    "eigval2", "plunge2", "azimuth2",
    "eigval3", "plunge3", "azimuth3",
]
TENSOR_FLOAT_FORMAT = "%.5e"    # 6 significant digits

# =============================================================================
# TENSOR FEATURES
# =============================================================================
DEGENERACY_TOLERANCE = 1e-9     # relative eigenvalue gap
VERTICAL_TOLERANCE = 1e-12      # horizontal norm below this is vertical
PREFER_CATALOG_AXES = True

FEATURE_TABLE_COLUMNS = ["event_id", "az1", "az2", "az3", "plunge3", "depth_class", "quality_flag"]

# =============================================================================
# CLASSIFIER
# =============================================================================
KDE_GRID_SIZE = 512
KDE_MIN_SAMPLES = 10
KDE_CANDIDATES = 64             # log-spaced bandwidth candidates
KDE_CANDIDATE_LOW = 0.05        # x normal-reference bandwidth
KDE_CANDIDATE_HIGH = 5.0
KDE_GRID_PAD = 3.0              # grid spans data range +- this many bandwidths
KDE_CV_BINS = 1000              # pair-distance bins for the cross-validation score
KDE_CV_EXACT_MAX = 2000         # below this many samples, use exact pair distances
THRESHOLD_GRID_SIZE = 2048

LABEL_TABLE_COLUMNS = ["event_id", "projection", "label"]

# =============================================================================
# SPATIAL / TEMPORAL BINNING
# =============================================================================
REGION_SIZE_DEG = 15.0
CELL_SIZE_DEG = 5.0
CELLS_PER_SIDE = 3              # 3 x 3 sub-cells per region
PERIODS_CHOICES = (26, 6)       # "2-week" and "2-month" periods
DEFAULT_PERIODS_PER_YEAR = (26,)
MIN_EVENTS_PER_MODE = 5         # eligible: count > MIN_EVENTS_PER_MODE for both modes

# Reconstructed 15 x 15 degree regions along the Pacific ring of fire.
# Anchors are (lat_min, lon_min) of each region's south-west corner.
RING_OF_FIRE_REGIONS = {
    "aleutians": (45.0, -180.0),
    "alaska": (55.0, -160.0),
    "japan_kuriles": (35.0, 135.0),
    "marianas": (10.0, 140.0),
    "philippines": (5.0, 120.0),
    "indonesia": (-10.0, 105.0),
    "solomon_vanuatu": (-20.0, 155.0),
    "tonga_kermadec": (-35.0, -180.0),
    "new_zealand": (-50.0, 165.0),
    "central_america": (5.0, -105.0),
    "south_america": (-35.0, -80.0),
}
REGION_PRESETS = {"ring_of_fire": RING_OF_FIRE_REGIONS}
DEFAULT_REGION_PRESET = "ring_of_fire"

PRESENCE_TABLE_COLUMNS = ["region_id", "sub_index", "mode", "period_index", "bit"]

# =============================================================================
# ASSOCIATION TESTS
# =============================================================================
LAG_CHOICES = (1, 2)
DEFAULT_LAGS = (1, 2)
N_PERMUTATIONS = 10000
PERMUTATION_CHUNK = 2000        # permutations evaluated per vectorised batch
HALDANE_CORRECTION = 0.5
P_VALUE_TIE_RULE = ">="         # ties count toward the p-value
PERCENTILE_TIE_RULE = "<"       # ties do not count toward the percentile
CHI_SQUARE_REL_TOLERANCE = 1e-12

RESULT_TABLE_COLUMNS = [
    "region_id", "sub_index", "comparison", "lag", "periods_per_year",
    "n11", "n10", "n01", "n00", "chi_square", "log_odds", "p_value",
    "log_odds_percentile", "degenerate", "seed", "asymptotic_p",
]

# =============================================================================
# FALSE DISCOVERY RATE
# =============================================================================
FDR_Q = 0.01
FDR_SCOPES = ("pooled", "per-region")
DEFAULT_FDR_SCOPE = "pooled"

FDR_TABLE_COLUMNS = [
    "test_id", "p_value", "rank", "bh_threshold", "interesting", "family",
]

# =============================================================================
# SYNTHETIC DATA
# =============================================================================
PROBABILITY_CLIP = (0.01, 0.99)
EXACT_MAX_LENGTH = 7

SYNTH_BASE_RATE = 0.2
SYNTH_SELF_EXCITE = 0.4
SYNTH_CROSS_INHIBIT = 0.4
SYNTH_ACTIVE_CELLS = 6
SYNTH_DEEP_PER_CELL = 150
SYNTH_MW_RANGE = (4.8, 6.5)
SYNTH_SHALLOW_DEPTH_KM = (10.0, 150.0)
SYNTH_DEEP_DEPTH_KM = (300.0, 650.0)
SYNTH_EIGENVALUE_SHAPE = (1.0, 0.08, -1.08)    # x scalar moment

# Principal-axis geometry per mode: (P azimuth, P plunge, T plunge), degrees.
SYNTH_MODE1_GEOMETRY = (180.0, 20.0, 50.0)
SYNTH_MODE2_GEOMETRY = (180.0, 55.0, 25.0)
SYNTH_AZIMUTH_JITTER = 8.0
SYNTH_PLUNGE_JITTER = 4.0

# =============================================================================
# PIPELINE
# =============================================================================
class Stage(Enum):
    """Pipeline stages; each persists its outputs in the run directory."""
    INGEST = "ingest"
    FEATURES = "features"
    CLASSIFY = "classify"
    ANALYZE = "analyze"
    REPORT = "report"
    SYNTH = "synth"


EVENTS_FILE = "events.csv"
AXES_FILE = "axes.csv"
FEATURES_FILE = "features.csv"
MODEL_FILE = "model.json"
LABELS_FILE = "labels.csv"
CONFUSION_FILE = "confusion.csv"
DENSITY_FILE = "density.csv"
SCATTER_FILE = "scatter.csv"
PRESENCE_FILE = "presence.csv"
RESULTS_FILE = "results.csv"
FDR_FILE = "fdr.csv"
RUN_META_FILE = "run_meta.json"
LOG_FILE = "run.log"
PLOTS_DIR = "plots"

DEFAULT_OUTPUT_DIR = "out"
DEFAULT_WORKERS = 1

# =============================================================================
# PLOTTING
# =============================================================================
FIGURE_SIZE = (15.0, 9.0)
SVG_HASH_SALT = "quake-modes"
COLOR_SELECTED = "#d62728"      # red: FDR-selected
COLOR_NOT_SELECTED = "#333333"
COLOR_BH_LINE = "#1f77b4"
COLOR_SHALLOW_DENSITY = "#2ca02c"   # green
COLOR_DEEP_DENSITY = "#d62728"      # red
COLOR_THRESHOLD = "#1f77b4"         # blue line

# =============================================================================
# RANDOM SEED (for reproducible permutation runs)
# =============================================================================
RANDOM_SEED = 42
