__version__ = "0.1.0"

HAS_CONCEPT = "has_concept"
MENTIONED_IN = "mentioned_in"
INVOLVES = "involves"
PARTICIPATES_IN = "participates_in"
INDUCED = "induced"
VV_RELATIONS = ("before", "after", "at the same time", "because", "as a result")
GRAPH_FORMAT_VERSION = 1
INDEX_FORMAT_VERSION = 1
