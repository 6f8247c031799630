"""Diagnostics catalog.

Each rule scans instance timelines and yields one `Hit` per offending
instance. Hits are aggregated by construction site (the trace id of the
timeline's first event) and class into `Finding` values whose severity is a
count/cost proxy: reallocations, copies, shifted elements, wasted capacity.

Anomalous timelines (a destructor with nothing before it) are ignored by
every rule. Timelines that never saw a destructor take part in growth and
copy rules but not in rules that need destructor data.
"""

from __future__ import annotations

from collections import Counter, defaultdict
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass

from pydantic import BaseModel, ConfigDict, Field

from w1.perfsan.config import RuleConfig
from w1.perfsan.enums import RuleId, ShimClass, ShimMethod
from w1.perfsan.errors import UnknownRuleError
from w1.perfsan.tracedb import InstanceTimeline

MAX_SAMPLES = 3


class Finding(BaseModel):
    """One diagnostic, aggregated over the instances created at one site.

    Attributes:
        rule: Rule that fired
        class_name: Class of the offending instances
        site: Trace id of the representative construction event
        instance_count: Number of offending instances at the site
        aggregate: Rule-specific total (e.g. reallocations)
        severity: Sort key; rule-specific cost proxy
        samples: Up to three representative trace ids, site first
    """

    model_config = ConfigDict(frozen=True)

    rule: RuleId
    class_name: str
    site: int = Field(ge=0)
    instance_count: int = Field(ge=1)
    aggregate: int = Field(ge=0)
    severity: int = Field(ge=1)
    samples: tuple[int, ...] = Field(min_length=1, max_length=MAX_SAMPLES)

    @property
    def sort_key(self) -> tuple[int, int, int, str]:
        return (-self.severity, self.rule.ordinal, self.site, self.class_name)


@dataclass(frozen=True, slots=True)
class Hit:
    """One offending instance.

    Attributes:
        timeline: The instance
        aggregate: Its contribution to the finding's aggregate
        severity: Its contribution to the finding's severity
        evidence: Trace ids of the events that triggered the rule
    """

    timeline: InstanceTimeline
    aggregate: int
    severity: int
    evidence: tuple[int, ...] = ()


Scan = Callable[[Sequence[InstanceTimeline], RuleConfig], Iterable[Hit]]


@dataclass(frozen=True, slots=True)
class Rule:
    """Catalog entry.

    ``description`` and ``recommendation`` may use ``{kind}``, replaced by
    the finding's class name when rendered.
    """

    id: RuleId
    description: str
    unit: str
    recommendation: str
    scan: Scan

    def headline(self, finding: Finding) -> tuple[str, str]:
        kind = finding.class_name
        description = self.description.format(kind=kind)
        return (
            f"** {description} (total {finding.aggregate:,} {self.unit}) "
            f"in {finding.instance_count:,} instances.",
            f"** {self.recommendation.format(kind=kind)}.",
        )


def _candidates(
    timelines: Sequence[InstanceTimeline],
    *classes: ShimClass,
) -> Iterable[InstanceTimeline]:
    names = {str(c) for c in classes}
    for timeline in timelines:
        if timeline.anomalous:
            continue
        if names and timeline.class_name not in names:
            continue
        yield timeline


def _traces(timeline: InstanceTimeline, *methods: ShimMethod) -> tuple[int, ...]:
    return tuple(e.trace_id for e in timeline.events if e.method_name in methods)


def _by_site(
    timelines: Iterable[InstanceTimeline],
) -> dict[tuple[int, str], list[InstanceTimeline]]:
    groups: dict[tuple[int, str], list[InstanceTimeline]] = defaultdict(list)
    for timeline in timelines:
        groups[(timeline.site, timeline.class_name)].append(timeline)
    return groups


# ---------------------------------------------------------------------------
# Rule scans
# ---------------------------------------------------------------------------


def scan_short_lifetime(
    timelines: Sequence[InstanceTimeline], config: RuleConfig
) -> Iterable[Hit]:
    for t in _candidates(timelines):
        lifetime = t.lifetime
        if lifetime is None or lifetime >= config.short_lifetime_ticks:
            continue
        if not t.heap_allocated:
            continue
        yield Hit(t, aggregate=max(t.allocation_count, 1), severity=1)


def scan_growth_realloc(
    timelines: Sequence[InstanceTimeline], config: RuleConfig
) -> Iterable[Hit]:
    del config
    for t in _candidates(timelines, ShimClass.VECTOR, ShimClass.STRING):
        reallocs = t.realloc_count
        if reallocs >= 2:
            yield Hit(t, reallocs, reallocs, _traces(t, ShimMethod.REALLOC))


def shifted_elements(timeline: InstanceTimeline) -> int:
    return sum(e.c for e in timeline.events if e.method_name == ShimMethod.INSERT)


def scan_data_shift(
    timelines: Sequence[InstanceTimeline], config: RuleConfig
) -> Iterable[Hit]:
    shifting = (t for t in _candidates(timelines) if shifted_elements(t) > 0)
    for group in _by_site(shifting).values():
        if sum(shifted_elements(t) for t in group) < config.data_shift_min:
            continue
        for t in group:
            shifted = shifted_elements(t)
            yield Hit(t, shifted, shifted, _traces(t, ShimMethod.INSERT))


def scan_push_back_copy(
    timelines: Sequence[InstanceTimeline], config: RuleConfig
) -> Iterable[Hit]:
    del config
    for t in _candidates(timelines):
        copies = [
            e for e in t.events if e.method_name == ShimMethod.PUSH_BACK and e.c == 1
        ]
        if copies:
            yield Hit(t, len(copies), len(copies), tuple(e.trace_id for e in copies))


def scan_shrink_to_fit(
    timelines: Sequence[InstanceTimeline], config: RuleConfig
) -> Iterable[Hit]:
    for t in _candidates(timelines, ShimClass.VECTOR):
        dtor = t.dtor
        if dtor is None:
            continue
        size, capacity = dtor.a, dtor.b
        waste = capacity - size
        if (
            waste >= config.shrink_waste_min
            and waste >= config.shrink_waste_ratio * size
        ):
            yield Hit(t, waste, waste, (dtor.trace_id,))


def scan_value_copy(
    timelines: Sequence[InstanceTimeline], config: RuleConfig
) -> Iterable[Hit]:
    del config
    containers = [c for c in ShimClass if c.is_container]
    for t in _candidates(timelines, *containers):
        first = t.first
        if first.method_name != ShimMethod.COPY_CTOR:
            continue
        if first.a > ShimClass(t.class_name).inline_threshold:
            yield Hit(t, 1, 1)


def scan_small_vector(
    timelines: Sequence[InstanceTimeline], config: RuleConfig
) -> Iterable[Hit]:
    completed = (t for t in _candidates(timelines, ShimClass.VECTOR) if t.completed)
    for group in _by_site(completed).values():
        qualifies = all(
            t.max_size <= config.small_vector_max
            and (t.realloc_count >= 1 or t.heap_allocated)
            for t in group
        )
        if qualifies:
            for t in group:
                yield Hit(t, max(t.allocation_count, 1), 1)


def scan_unique_shared(
    timelines: Sequence[InstanceTimeline], config: RuleConfig
) -> Iterable[Hit]:
    del config
    for t in _candidates(timelines, ShimClass.SHARED_PTR):
        if t.max_refcount == 1:
            yield Hit(t, 1, 1)


def scan_duplicate_string(
    timelines: Sequence[InstanceTimeline], config: RuleConfig
) -> Iterable[Hit]:
    strings = [
        t
        for t in _candidates(timelines, ShimClass.STRING)
        if t.dtor is not None and t.dtor.a > 0
    ]
    repeats = Counter(t.dtor.c for t in strings if t.dtor is not None)
    for t in strings:
        assert t.dtor is not None
        if repeats[t.dtor.c] >= config.duplicate_string_min:
            yield Hit(t, 1, 1, (t.dtor.trace_id,))


def scan_unordered_map(
    timelines: Sequence[InstanceTimeline], config: RuleConfig
) -> Iterable[Hit]:
    del config
    for t in _candidates(timelines, ShimClass.MAP):
        lookups = sum(t.count(m) for m in _LOOKUPS)
        if lookups and not t.count(ShimMethod.ITER_ORDERED):
            yield Hit(t, 1, 1)


_LOOKUPS = frozenset(m for m in ShimMethod if m.is_lookup)


def double_lookup_pairs(timeline: InstanceTimeline, window: int) -> list[int]:
    """Indices of ``count``/``find`` events repeated by a lookup of the same key.

    A pair is a ``count`` or ``find`` followed within ``window`` events by a
    ``subscript``, ``count`` or ``find`` carrying the same key hash.
    """
    events = timeline.events
    pairs: list[int] = []
    for i, first in enumerate(events):
        if first.method_name not in (ShimMethod.COUNT, ShimMethod.FIND):
            continue
        for second in events[i + 1 : i + 1 + window]:
            if second.method_name in _LOOKUPS and second.a == first.a:
                pairs.append(i)
                break
    return pairs


def scan_double_lookup(
    timelines: Sequence[InstanceTimeline], config: RuleConfig
) -> Iterable[Hit]:
    for t in _candidates(timelines, ShimClass.MAP, ShimClass.UNORDERED_MAP):
        pairs = double_lookup_pairs(t, config.double_lookup_window)
        if pairs:
            evidence = tuple(t.events[i].trace_id for i in pairs)
            yield Hit(t, len(pairs), len(pairs), evidence)


def scan_unused_instance(
    timelines: Sequence[InstanceTimeline], config: RuleConfig
) -> Iterable[Hit]:
    del config
    containers = [c for c in ShimClass if c.is_container]
    for t in _candidates(timelines, *containers):
        if t.methods == (ShimMethod.CTOR, ShimMethod.DTOR):
            yield Hit(t, 1, 1)


def scan_high_refcount(
    timelines: Sequence[InstanceTimeline], config: RuleConfig
) -> Iterable[Hit]:
    for t in _candidates(timelines, ShimClass.SHARED_PTR):
        peak = t.max_refcount
        if peak >= config.high_refcount_min:
            yield Hit(t, peak, peak, _traces(t, ShimMethod.INCREF)[-1:])


CATALOG: dict[RuleId, Rule] = {
    rule.id: rule
    for rule in (
        Rule(
            RuleId.SHORT_LIFETIME,
            "Short-lived {kind} instances allocate memory",
            "allocations",
            "Consider reusing the {kind} or hoisting it out of the loop",
            scan_short_lifetime,
        ),
        Rule(
            RuleId.GROWTH_REALLOC,
            "Repeatedly growing a {kind}",
            "reallocations",
            "Consider reserving space when the {kind} is constructed",
            scan_growth_realloc,
        ),
        Rule(
            RuleId.DATA_SHIFT,
            "Inserting into the front of a {kind}",
            "shifted elements",
            "Consider appending and reversing, or a deque",
            scan_data_shift,
        ),
        Rule(
            RuleId.PUSH_BACK_COPY,
            "Copying elements into a {kind} with push_back",
            "copies",
            "Consider emplace_back to construct elements in place",
            scan_push_back_copy,
        ),
        Rule(
            RuleId.SHRINK_TO_FIT,
            "A {kind} holds unused capacity until destruction",
            "wasted slots",
            "Consider calling shrink_to_fit once the {kind} is filled",
            scan_shrink_to_fit,
        ),
        Rule(
            RuleId.VALUE_COPY,
            "Copying an allocating {kind} (passed by value)",
            "copies",
            "Consider passing the {kind} by reference or moving it",
            scan_value_copy,
        ),
        Rule(
            RuleId.SMALL_VECTOR,
            "A {kind} always stays small but allocates",
            "allocations",
            "Consider a small vector with inline storage",
            scan_small_vector,
        ),
        Rule(
            RuleId.UNIQUE_SHARED,
            "A {kind} is never shared",
            "instances",
            "Consider using std::unique_ptr instead",
            scan_unique_shared,
        ),
        Rule(
            RuleId.DUPLICATE_STRING,
            "The same {kind} content is stored many times",
            "copies",
            "Consider interning the value or sharing one instance",
            scan_duplicate_string,
        ),
        Rule(
            RuleId.UNORDERED_MAP,
            "Map instance is not used as an ordered container",
            "instances",
            "Consider using std::unordered_map instead",
            scan_unordered_map,
        ),
        Rule(
            RuleId.DOUBLE_LOOKUP,
            "Looking up the same key twice in a {kind}",
            "repeated lookups",
            "Consider using the iterator returned by find",
            scan_double_lookup,
        ),
        Rule(
            RuleId.UNUSED_INSTANCE,
            "A {kind} is constructed and never used",
            "instances",
            "Consider removing the unused {kind}",
            scan_unused_instance,
        ),
        Rule(
            RuleId.HIGH_REFCOUNT,
            "A {kind} reaches a very high reference count",
            "peak references",
            "Consider passing the {kind} by reference instead of copying it",
            scan_high_refcount,
        ),
    )
}


def get_rule(rule_id: str) -> Rule:
    """Look up a catalog entry by its stable id.

    Raises:
        UnknownRuleError: ``rule_id`` is not in the catalog.
    """
    try:
        return CATALOG[RuleId(rule_id)]
    except ValueError:
        raise UnknownRuleError(rule_id) from None


def aggregate(rule: Rule, hits: Iterable[Hit], config: RuleConfig) -> list[Finding]:
    """Fold hits into one finding per (site, class)."""
    groups: dict[tuple[int, str], list[Hit]] = defaultdict(list)
    for hit in hits:
        groups[(hit.timeline.site, hit.timeline.class_name)].append(hit)

    findings: list[Finding] = []
    for (site, class_name), group in groups.items():
        severity = sum(h.severity for h in group)
        if len(group) < config.min_instances_per_finding or severity < 1:
            continue
        samples = [site]
        for hit in group:
            for trace_id in hit.evidence:
                if len(samples) == MAX_SAMPLES:
                    break
                if trace_id not in samples:
                    samples.append(trace_id)
        findings.append(
            Finding(
                rule=rule.id,
                class_name=class_name,
                site=site,
                instance_count=len(group),
                aggregate=sum(h.aggregate for h in group),
                severity=severity,
                samples=tuple(samples),
            )
        )
    return findings


def evaluate(
    rule_id: str,
    timelines: Sequence[InstanceTimeline],
    config: RuleConfig | None = None,
) -> list[Finding]:
    """Run one rule; findings ordered by severity desc, then site asc.

    Raises:
        UnknownRuleError: ``rule_id`` is not in the catalog.
    """
    rule = get_rule(rule_id)
    config = config or RuleConfig()
    findings = aggregate(rule, rule.scan(timelines, config), config)
    return sorted(findings, key=lambda f: (-f.severity, f.site, f.class_name))


def run_all(
    timelines: Sequence[InstanceTimeline],
    config: RuleConfig | None = None,
    rule_ids: Iterable[str] | None = None,
) -> list[Finding]:
    """Run every rule (or the selected ones) and sort globally.

    Order: severity desc, then catalog order, then site id.
    """
    config = config or RuleConfig()
    if rule_ids is None:
        selected = list(CATALOG)
    else:
        selected = [get_rule(r).id for r in rule_ids]
    findings = [f for rule_id in selected for f in evaluate(rule_id, timelines, config)]
    return sorted(findings, key=lambda f: f.sort_key)
