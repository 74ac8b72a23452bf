"""Second-person variable extraction, speaker profiling and dialect clustering."""

from .corpus import Document, SpeakerMetadata, Token, load_metadata, parse_annotated
from .inventory import Variable
from .matcher import Pattern, TokenConstraint, builtin_rules, find_matches, load_rules, match_token
from .variables import Observation, classify, export_observations, extract_all
from .profiles import SpeakerProfile, compute_profiles, empirical_log_odds

__version__ = "0.1.0"
