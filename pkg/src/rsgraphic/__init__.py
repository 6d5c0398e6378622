"""Graphics of pairs of Morse functions on implicit 3-manifolds, and the band-sweep bounds on
the Reidemeister-Singer distance they give."""
from .expr import parse
from .graphic import Graphic, deserialize, serialize, validate
from .manifold import ImplicitThreeManifold, by_name, sphere
from .pipeline import analyze, load_problem, run_pipeline, trace_pair
from .sweep import bounds, sweep, sweep_all
from .tracer import extract_graphic, trace_singular_set, verify_stability

__version__ = "0.1.0"
