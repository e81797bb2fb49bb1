"""Hypercube cache placement and one-shot zero-forcing delivery."""

from .combinatorics import (DimensionPartition, EnumerationLimitError, InvalidInputError,
                            enumerate_circular_hypercube_permutations,
                            enumerate_hypercube_permutations, is_hypercube_permutation)
from .placement import (CacheManifest, DerivedParams, InvalidConfigError, NetworkConfig,
                        SubfileId, Violation, cache_manifest, split_files, validate_config)
from .scheduler import (CoverageReport, DeliveryStep, PacketId, ReceiverRole, Schedule,
                        build_schedule, verify_exact_cover)
from .analytics import gap_analysis, plan_memory_sharing, subpacketization

__version__ = "0.1.0"
