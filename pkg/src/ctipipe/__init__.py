"""ctipipe: turn security reports and malware analyses into a structured,
correlatable threat-event dataset."""

from .analytics import (
    CategoryLabel,
    PipelineSummary,
    StatTables,
    TypeYearCounts,
    category_percentages,
    classify_category,
    pipeline_summary,
    type_year_counts,
)
from .config import ConfigError, PipelineConfig, load_config
from .correlation import (
    CorrelationGraph,
    Edge,
    GraphOptions,
    build_graph,
    event_set_similarity,
    exact_edges,
    find_path,
    fuzzy_edges,
    temporal_timeline,
)
from .enrichment import (
    AnalysisRecord,
    EnrichmentResult,
    enrich_transitively,
    fetch_analysis,
    record_to_attributes,
)
from .events import (
    Attribute,
    Event,
    EventSet,
    build_malware_event,
    build_report_event,
    export_misp,
    group_event_sets,
    import_misp,
)
from .extraction import (
    Indicator,
    IndicatorKind,
    classify_hash,
    extract_indicators,
    normalize_defanged,
)
from .filtering import (
    DenyRule,
    NoiseReport,
    apply_denylist,
    contextual_noise_scores,
    dedup_attributes,
    load_denylist,
)
from .providers import AnalysisDataError, FixtureProvider, HttpProvider, ProviderError
from .store import EventStore, StoreError, load_all

__version__ = "0.1.0"

__all__ = [
    "AnalysisDataError",
    "AnalysisRecord",
    "Attribute",
    "CategoryLabel",
    "ConfigError",
    "CorrelationGraph",
    "DenyRule",
    "Edge",
    "EnrichmentResult",
    "Event",
    "EventSet",
    "EventStore",
    "FixtureProvider",
    "GraphOptions",
    "HttpProvider",
    "Indicator",
    "IndicatorKind",
    "NoiseReport",
    "PipelineConfig",
    "PipelineSummary",
    "ProviderError",
    "StatTables",
    "StoreError",
    "TypeYearCounts",
    "apply_denylist",
    "build_graph",
    "build_malware_event",
    "build_report_event",
    "category_percentages",
    "classify_category",
    "classify_hash",
    "contextual_noise_scores",
    "dedup_attributes",
    "enrich_transitively",
    "event_set_similarity",
    "exact_edges",
    "export_misp",
    "extract_indicators",
    "fetch_analysis",
    "find_path",
    "fuzzy_edges",
    "group_event_sets",
    "import_misp",
    "load_all",
    "load_config",
    "load_denylist",
    "normalize_defanged",
    "pipeline_summary",
    "record_to_attributes",
    "temporal_timeline",
    "type_year_counts",
]
