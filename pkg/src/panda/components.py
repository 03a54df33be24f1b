"""Registry of the modeled CPU components, their configuration parameters,
and their workload event counters.

The power model decomposes an out-of-order core into 13 architecture-level
components grouped into four CPU parts. Each component is driven by a fixed
subset of the design's configuration parameters and a fixed subset of the
performance counters collected during simulation. Those subsets are the
feature tables below; everything downstream (feature construction, training,
prediction) is driven from this module so the tables exist in exactly one
place.

Counter names are normalized to dot-free identifiers so they can double as
feature names and CSV column headers (``icache.overallAccesses`` becomes
``icache_overallAccesses``). ``EVENT_NAME_ALIASES`` keeps the mapping from
the dotted simulator spellings.
"""

from __future__ import annotations

from enum import Enum


class CpuPart(str, Enum):
    """Coarse grouping of components into four functional parts."""

    FRONTEND = "Frontend"
    EXECUTION = "Execution"
    MEM_ACCESS = "MemAccess"
    OTHER_LOGIC = "OtherLogic"


class ComponentId(str, Enum):
    """The 13 modeled core components."""

    BP = "BP"
    IFU = "IFU"
    ITLB = "ITLB"
    ICACHE = "ICache"
    RNU = "RNU"
    ROB = "ROB"
    ISU = "ISU"
    REGFILE = "Regfile"
    FUPOOL = "FUPool"
    LSU = "LSU"
    DTLB = "DTLB"
    DCACHE = "DCache"
    OTHER_LOGIC = "OtherLogic"

    @property
    def part(self) -> CpuPart:
        return COMPONENT_PART[self]


COMPONENT_PART: dict[ComponentId, CpuPart] = {
    ComponentId.BP: CpuPart.FRONTEND,
    ComponentId.IFU: CpuPart.FRONTEND,
    ComponentId.ITLB: CpuPart.FRONTEND,
    ComponentId.ICACHE: CpuPart.FRONTEND,
    ComponentId.RNU: CpuPart.EXECUTION,
    ComponentId.ROB: CpuPart.EXECUTION,
    ComponentId.ISU: CpuPart.EXECUTION,
    ComponentId.REGFILE: CpuPart.EXECUTION,
    ComponentId.FUPOOL: CpuPart.EXECUTION,
    ComponentId.LSU: CpuPart.MEM_ACCESS,
    ComponentId.DTLB: CpuPart.MEM_ACCESS,
    ComponentId.DCACHE: CpuPart.MEM_ACCESS,
    ComponentId.OTHER_LOGIC: CpuPart.OTHER_LOGIC,
}

# Canonical ordering of the 17 design knobs. Serialization, feature vectors,
# and the built-in configuration table all follow this order.
CONFIG_PARAM_NAMES: tuple[str, ...] = (
    "FetchWidth",
    "DecodeWidth",
    "FetchBufferEntry",
    "RobEntry",
    "IntPhyRegister",
    "FpPhyRegister",
    "LDQEntry",
    "STQEntry",
    "BranchCount",
    "MemIssueWidth",
    "FpIssueWidth",
    "IntIssueWidth",
    "DCacheWay",
    "ICacheWay",
    "DTLBEntry",
    "DCacheMSHR",
    "ICacheFetchBytes",
)

# Some knobs are known under per-side names in the simulator configuration
# even though the design stores a single shared value. Dataset loading and
# documentation accept these spellings.
CONFIG_PARAM_ALIASES: dict[str, str] = {
    "ICacheTLBEntry": "DTLBEntry",
    "DCacheTLBEntry": "DTLBEntry",
}


def resolve_param_name(name: str) -> str:
    """Canonical knob name for a name or accepted alias; KeyError otherwise."""
    canonical = CONFIG_PARAM_ALIASES.get(name, name)
    if canonical not in CONFIG_PARAM_NAMES:
        raise KeyError(f"unknown configuration parameter {name!r}")
    return canonical

# Configuration parameters driving each component's ML features. The I-TLB
# and D-Cache rows reference the shared TLB knob through its aliases above.
COMPONENT_CONFIG_PARAMS: dict[ComponentId, tuple[str, ...]] = {
    ComponentId.BP: ("FetchWidth", "BranchCount"),
    ComponentId.IFU: ("FetchWidth", "DecodeWidth", "FetchBufferEntry", "ICacheFetchBytes"),
    ComponentId.ITLB: ("DTLBEntry",),
    ComponentId.ICACHE: ("ICacheWay", "ICacheFetchBytes"),
    ComponentId.RNU: ("DecodeWidth",),
    ComponentId.ROB: ("DecodeWidth", "RobEntry"),
    ComponentId.ISU: ("DecodeWidth", "MemIssueWidth", "FpIssueWidth", "IntIssueWidth"),
    ComponentId.REGFILE: ("DecodeWidth", "IntPhyRegister", "FpPhyRegister"),
    ComponentId.FUPOOL: ("MemIssueWidth", "FpIssueWidth", "IntIssueWidth"),
    ComponentId.LSU: ("LDQEntry", "STQEntry", "MemIssueWidth"),
    ComponentId.DTLB: ("DTLBEntry",),
    ComponentId.DCACHE: ("DCacheWay", "DTLBEntry", "DCacheMSHR", "MemIssueWidth"),
    # OtherLogic sees every knob; filled in below.
    ComponentId.OTHER_LOGIC: CONFIG_PARAM_NAMES,
}

# Event counters driving each component's ML features, dot-free.
COMPONENT_EVENTS: dict[ComponentId, tuple[str, ...]] = {
    ComponentId.BP: (
        "BTBLookups",
        "condPredicted",
        "condIncorrect",
        "commit_branches",
    ),
    ComponentId.IFU: (
        "fetch_insts",
        "fetch_branches",
        "fetch_cycles",
        "numRefs",
        "numStoreInsts",
        "numInsts",
        "decode_runCycles",
        "decode_blockedCycles",
        "decode_decodedInsts",
        "numBranches",
        "intInstQueueReads",
        "intInstQueueWrites",
        "intInstQueueWakeupAccesses",
        "fpInstQueueReads",
        "fpInstQueueWrites",
        "fpInstQueueWakeupAccesses",
    ),
    ComponentId.ITLB: ("itb_accesses", "itb_misses"),
    ComponentId.ICACHE: (
        "icache_overallAccesses",
        "icache_overallMisses",
        "icache_ReadReq_mshrHits",
        "icache_ReadReq_mshrMisses",
        "icache_tagAccesses",
    ),
    ComponentId.RNU: (
        "intLookups",
        "renamedOperands",
        "fpLookups",
        "renamedInsts",
        "runCycles",
        "blockCycles",
        "committedMaps",
    ),
    ComponentId.ROB: ("rob_reads", "rob_writes"),
    ComponentId.ISU: (
        "IssuedMemRead",
        "IssuedMemWrite",
        "IssuedFloatMemRead",
        "IssuedFloatMemWrite",
        "IssuedIntAlu",
        "IssuedIntMult",
        "IssuedIntDiv",
        "IssuedFloatMult",
        "IssuedFloatDiv",
    ),
    ComponentId.REGFILE: (
        "intRegfileReads",
        "fpRegfileReads",
        "intRegfileWrites",
        "fpRegfileWrites",
        "functionCalls",
    ),
    ComponentId.FUPOOL: ("intAluAccesses", "fpAluAccesses"),
    ComponentId.LSU: ("MemRead", "InstPrefetch", "MemWrite"),
    ComponentId.DTLB: ("dtb_accesses", "dtb_misses"),
    ComponentId.DCACHE: (
        "dcache_ReadReq_accesses",
        "dcache_WriteReq_accesses",
        "dcache_ReadReq_misses",
        "dcache_WriteReq_misses",
        "dcache_overallMisses",
        "dcache_MshrHits",
        "dcache_MshrMisses",
        "dcache_tagAccesses",
    ),
    # OtherLogic sees every counter; filled in below.
    ComponentId.OTHER_LOGIC: (),
}

# Counters not owned by a single component: the cycle base, idle time, and
# the aggregate predictor/cache counters consumed by the cycle calibrator.
SHARED_EVENTS: tuple[str, ...] = (
    "numCycles",
    "idleCycles",
    "branchPred_condPredicted",
    "branchPred_condIncorrect",
    "dcache_overallMshrMisses",
)


def _build_registry() -> tuple[str, ...]:
    seen: dict[str, None] = {}
    for comp in ComponentId:
        for name in COMPONENT_EVENTS[comp]:
            seen.setdefault(name, None)
    for name in SHARED_EVENTS:
        seen.setdefault(name, None)
    return tuple(seen)


EVENT_REGISTRY: tuple[str, ...] = _build_registry()

COMPONENT_EVENTS[ComponentId.OTHER_LOGIC] = EVENT_REGISTRY

# Dotted simulator spellings for the normalized counter names.
EVENT_NAME_ALIASES: dict[str, str] = {
    "commit.branches": "commit_branches",
    "fetch.insts": "fetch_insts",
    "fetch.branches": "fetch_branches",
    "fetch.cycles": "fetch_cycles",
    "decode.runCycles": "decode_runCycles",
    "decode.blockedCycles": "decode_blockedCycles",
    "decode.decodedInsts": "decode_decodedInsts",
    "itb.accesses": "itb_accesses",
    "itb.misses": "itb_misses",
    "icache.overallAccesses": "icache_overallAccesses",
    "icache.overallMisses": "icache_overallMisses",
    "icache.ReadReq.mshrHits": "icache_ReadReq_mshrHits",
    "icache.ReadReq.mshrMisses": "icache_ReadReq_mshrMisses",
    "icache.tagAccesses": "icache_tagAccesses",
    "rob.reads": "rob_reads",
    "rob.writes": "rob_writes",
    "dtb.accesses": "dtb_accesses",
    "dtb.misses": "dtb_misses",
    "dcache.ReadReq.accesses": "dcache_ReadReq_accesses",
    "dcache.WriteReq.accesses": "dcache_WriteReq_accesses",
    "dcache.ReadReq.misses": "dcache_ReadReq_misses",
    "dcache.WriteReq.misses": "dcache_WriteReq_misses",
    "dcache.overallMisses": "dcache_overallMisses",
    "dcache.MshrHits": "dcache_MshrHits",
    "dcache.MshrMisses": "dcache_MshrMisses",
    "dcache.tagAccesses": "dcache_tagAccesses",
    "branchPred.condPredicted": "branchPred_condPredicted",
    "branchPred.condIncorrect": "branchPred_condIncorrect",
    "dcache.overallMshrMisses": "dcache_overallMshrMisses",
}

# Counters consumed by the cycle-count calibrator (besides the full set of
# configuration parameters).
PERF_EVENTS: tuple[str, ...] = (
    "numCycles",
    "idleCycles",
    "branchPred_condPredicted",
    "branchPred_condIncorrect",
    "icache_overallMisses",
    "icache_ReadReq_mshrMisses",
    "dcache_ReadReq_misses",
    "dcache_WriteReq_misses",
    "dcache_overallMisses",
    "dcache_overallMshrMisses",
)

# Components whose resource function includes a fitted additive bias.
BIASED_COMPONENTS: tuple[ComponentId, ...] = (
    ComponentId.ITLB,
    ComponentId.DTLB,
    ComponentId.OTHER_LOGIC,
)
