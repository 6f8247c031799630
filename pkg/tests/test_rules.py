"""Tests for the diagnostics catalog."""

from collections import defaultdict
from collections.abc import Callable, Sequence
from pathlib import Path

import pytest
from pydantic import ValidationError

from w1.perfsan.config import RuleConfig
from w1.perfsan.corpus import CorpusRun, get_program, positive_programs, run_programs
from w1.perfsan.enums import RuleId
from w1.perfsan.errors import UnknownRuleError
from w1.perfsan.frames import StaticFrameProvider
from w1.perfsan.logger import EventLogger
from w1.perfsan.rules import (
    CATALOG,
    Finding,
    double_lookup_pairs,
    evaluate,
    get_rule,
    run_all,
)
from w1.perfsan.shims import HashedMap, OrderedMap
from w1.perfsan.tracedb import (
    InstanceTimeline,
    MethodEvent,
    TraceDb,
    reconstruct_instances,
)

Timelines = Callable[[], list[InstanceTimeline]]


@pytest.fixture
def timelines(analyze: Callable[[], TraceDb]) -> Timelines:
    """Return a callable producing the logged instance timelines."""

    def _timelines() -> list[InstanceTimeline]:
        return reconstruct_instances(analyze())

    return _timelines


def _grow(log: EventLogger, address: int, reallocs: int) -> None:
    log.log_event("vector", "ctor", address)
    log.log_event("vector", "reserve", address, 1, 0, 1)
    capacity = 1
    for _ in range(reallocs):
        log.log_event("vector", "realloc", address, capacity * 2, capacity)
        capacity *= 2
    log.log_event("vector", "dtor", address, capacity, capacity)


class TestCatalog:
    """Catalog lookup and rendering."""

    def test_every_rule_is_cataloged_in_order(self) -> None:
        assert list(CATALOG) == list(RuleId)
        assert [r.ordinal for r in CATALOG] == list(range(1, 14))

    def test_get_rule(self) -> None:
        assert get_rule("growth-realloc").id is RuleId.GROWTH_REALLOC
        with pytest.raises(UnknownRuleError):
            get_rule("no-such-rule")

    def test_headline(self) -> None:
        finding = Finding(
            rule=RuleId.GROWTH_REALLOC,
            class_name="vector",
            site=2,
            instance_count=1200,
            aggregate=7000,
            severity=7000,
            samples=(2,),
        )
        assert CATALOG[RuleId.GROWTH_REALLOC].headline(finding) == (
            "** Repeatedly growing a vector (total 7,000 reallocations) "
            "in 1,200 instances.",
            "** Consider reserving space when the vector is constructed.",
        )

    def test_finding_validation(self) -> None:
        with pytest.raises(ValidationError):
            Finding(
                rule=RuleId.DATA_SHIFT,
                class_name="vector",
                site=1,
                instance_count=1,
                aggregate=1,
                severity=0,
                samples=(1,),
            )
        with pytest.raises(ValidationError):
            Finding(
                rule=RuleId.DATA_SHIFT,
                class_name="vector",
                site=1,
                instance_count=1,
                aggregate=1,
                severity=1,
                samples=(1, 2, 3, 4),
            )


class TestScans:
    """Rules on hand-built logs."""

    def test_single_realloc_is_fine(
        self, event_logger: EventLogger, timelines: Timelines
    ) -> None:
        _grow(event_logger, 0x10, reallocs=1)
        assert evaluate("growth-realloc", timelines()) == []

    def test_repeated_growth(
        self, event_logger: EventLogger, timelines: Timelines
    ) -> None:
        _grow(event_logger, 0x10, reallocs=3)
        _grow(event_logger, 0x20, reallocs=2)
        (finding,) = evaluate("growth-realloc", timelines())
        assert finding.instance_count == 2
        assert finding.aggregate == 5
        assert finding.severity == 5

    def test_min_instances_per_finding(
        self, event_logger: EventLogger, timelines: Timelines
    ) -> None:
        _grow(event_logger, 0x10, reallocs=3)
        config = RuleConfig(min_instances_per_finding=2)
        assert evaluate("growth-realloc", timelines(), config) == []

    def test_shrink_to_fit_thresholds(
        self, event_logger: EventLogger, timelines: Timelines
    ) -> None:
        event_logger.log_event("vector", "ctor", 0x10)
        event_logger.log_event("vector", "dtor", 0x10, 10, 32)
        event_logger.log_event("vector", "ctor", 0x20)
        event_logger.log_event("vector", "dtor", 0x20, 10, 29)
        (finding,) = evaluate("shrink-to-fit", timelines())
        assert finding.aggregate == 22
        assert finding.instance_count == 1

    def test_value_copy_ignores_inline_strings(
        self, event_logger: EventLogger, timelines: Timelines
    ) -> None:
        event_logger.log_event("string", "copy_ctor", 0x10, 10, 15)
        event_logger.log_event("string", "copy_ctor", 0x20, 40, 40)
        (finding,) = evaluate("value-copy", timelines())
        assert finding.instance_count == 1

    def test_data_shift_threshold_is_per_site(
        self, event_logger: EventLogger, timelines: Timelines
    ) -> None:
        for address in (0x10, 0x20):
            event_logger.log_event("vector", "ctor", address)
            event_logger.log_event("vector", "insert", address, 601, 1024, 600)
        (finding,) = evaluate("data-shift", timelines())
        assert finding.aggregate == 1200
        assert finding.instance_count == 2
        strict = RuleConfig(data_shift_min=1201)
        assert evaluate("data-shift", timelines(), strict) == []

    def test_unused_instance(
        self, event_logger: EventLogger, timelines: Timelines
    ) -> None:
        event_logger.log_event("map", "ctor", 0x10)
        event_logger.log_event("map", "dtor", 0x10)
        event_logger.log_event("shared_ptr", "ctor", 0x20, 1)
        event_logger.log_event("shared_ptr", "dtor", 0x20, 1)
        (finding,) = evaluate("unused-instance", timelines())
        assert finding.class_name == "map"

    def test_unordered_map_needs_lookups(
        self, event_logger: EventLogger, timelines: Timelines
    ) -> None:
        event_logger.log_event("map", "ctor", 0x10)
        event_logger.log_event("map", "find", 0x10, 7, 1)
        event_logger.log_event("map", "ctor", 0x20)
        event_logger.log_event("map", "find", 0x20, 7, 1)
        event_logger.log_event("map", "iter_ordered", 0x20, 1)
        (finding,) = evaluate("unordered-map", timelines())
        assert finding.instance_count == 1

    def test_anomalous_timelines_are_ignored(
        self, event_logger: EventLogger, timelines: Timelines
    ) -> None:
        event_logger.log_event("vector", "dtor", 0x10, 0, 64)
        (timeline,) = timelines()
        assert timeline.anomalous
        assert run_all([timeline]) == []

    def test_samples_start_at_site_and_are_capped(
        self,
        event_logger: EventLogger,
        frame_provider: StaticFrameProvider,
        timelines: Timelines,
    ) -> None:
        event_logger.log_event("vector", "ctor", 0x10)
        for leaf in (0x3000, 0x4000, 0x5000):
            frame_provider.frames = [0x1000, leaf]
            event_logger.log_event("vector", "push_back", 0x10, 1, 1, 1)
        (finding,) = evaluate("push-back-copy", timelines())
        assert finding.aggregate == 3
        assert finding.samples == (2, 3, 4)


class TestDoubleLookupPairs:
    """Window semantics of repeated lookups."""

    def test_window(self, event_logger: EventLogger, timelines: Timelines) -> None:
        event_logger.log_event("unordered_map", "count", 0x10, 5, 1)
        event_logger.log_event("unordered_map", "insert", 0x10, 9, 2)
        event_logger.log_event("unordered_map", "subscript", 0x10, 5, 2)
        (timeline,) = timelines()
        assert double_lookup_pairs(timeline, window=1) == []
        assert double_lookup_pairs(timeline, window=2) == [0]

    def test_different_keys_do_not_pair(
        self, event_logger: EventLogger, timelines: Timelines
    ) -> None:
        event_logger.log_event("unordered_map", "find", 0x10, 5, 0)
        event_logger.log_event("unordered_map", "subscript", 0x10, 6, 1)
        (timeline,) = timelines()
        assert double_lookup_pairs(timeline, window=4) == []


class TestDoubleLookupOnMaps:
    """Double lookups produced by real map usage."""

    def test_check_then_assign(
        self, event_logger: EventLogger, timelines: Timelines
    ) -> None:
        with HashedMap(logger=event_logger) as table:
            for i in range(50):
                if i not in table:
                    table[i] = i
        (finding,) = evaluate("double-lookup", timelines())
        assert finding.class_name == "unordered_map"
        assert finding.aggregate == 50

    def test_check_then_update_ordered(
        self, event_logger: EventLogger, timelines: Timelines
    ) -> None:
        with OrderedMap({"hits": 0}, logger=event_logger) as counts:
            if "hits" in counts:
                counts["hits"] += 1
        (finding,) = evaluate("double-lookup", timelines())
        assert finding.class_name == "map"
        assert finding.aggregate == 1

    def test_equal_numeric_keys_pair(
        self, event_logger: EventLogger, timelines: Timelines
    ) -> None:
        with HashedMap({1: "one"}, logger=event_logger) as table:
            if True in table:
                assert table[1] == "one"
        (finding,) = evaluate("double-lookup", timelines())
        assert finding.aggregate == 1

    def test_assign_then_find_is_clean(
        self, event_logger: EventLogger, timelines: Timelines
    ) -> None:
        with HashedMap(logger=event_logger) as table:
            for i in range(50):
                table[i] = i
            for i in range(50):
                table.find(i)
        assert evaluate("double-lookup", timelines()) == []


class TestOrdering:
    """Finding order within and across rules."""

    def test_evaluate_sorts_by_severity(
        self,
        event_logger: EventLogger,
        frame_provider: StaticFrameProvider,
        timelines: Timelines,
    ) -> None:
        for leaf, reallocs in ((0x3000, 2), (0x4000, 6), (0x5000, 4)):
            frame_provider.frames = [0x1000, leaf]
            _grow(event_logger, leaf, reallocs)
        findings = evaluate("growth-realloc", timelines())
        assert [f.severity for f in findings] == [6, 4, 2]

    def test_run_all_breaks_ties_by_catalog_order(
        self, event_logger: EventLogger, timelines: Timelines
    ) -> None:
        event_logger.log_event("vector", "ctor", 0x10)
        event_logger.log_event("vector", "push_back", 0x10, 1, 1, 1)
        event_logger.log_event("vector", "push_back", 0x10, 2, 2, 1)
        event_logger.log_event("vector", "realloc", 0x10, 2, 1)
        event_logger.log_event("vector", "realloc", 0x10, 4, 2)
        findings = run_all(
            timelines(), rule_ids=["push-back-copy", "growth-realloc"]
        )
        assert [f.rule for f in findings] == [
            RuleId.GROWTH_REALLOC,
            RuleId.PUSH_BACK_COPY,
        ]

    def test_run_all_rejects_unknown_ids(self) -> None:
        with pytest.raises(UnknownRuleError):
            run_all([], rule_ids=["bogus"])


@pytest.mark.parametrize("rule", list(RuleId))
class TestRuleSoundness:
    """Each rule fires on its positive program and not on its negative."""

    def test_positive_program_fires(self, rule: RuleId, tmp_path: Path) -> None:
        program = get_program(rule, positive=True)
        run = run_programs([program], tmp_path / "pos.w1log")
        assert len(run.fired(rule)) >= 1

    def test_negative_program_is_clean(self, rule: RuleId, tmp_path: Path) -> None:
        program = get_program(rule, positive=False)
        run = run_programs([program], tmp_path / "neg.w1log")
        assert run.fired(rule) == []


# ---------------------------------------------------------------------------
# Brute-force aggregation oracle
# ---------------------------------------------------------------------------

Site = tuple[int, str]


def _epochs(events: Sequence[MethodEvent]) -> list[list[MethodEvent]]:
    live: dict[tuple[str, int], list[MethodEvent]] = {}
    finished: list[list[MethodEvent]] = []
    for event in events:
        key = (event.class_name, event.instance)
        live.setdefault(key, []).append(event)
        if event.method_name == "dtor":
            finished.append(live.pop(key))
    return finished + list(live.values())


def _site(epoch: list[MethodEvent]) -> Site:
    return (epoch[0].trace_id, epoch[0].class_name)


def _reallocs(events: Sequence[MethodEvent]) -> dict[Site, int]:
    totals: dict[Site, int] = defaultdict(int)
    for epoch in _epochs(events):
        if epoch[0].class_name not in ("vector", "string"):
            continue
        count = sum(1 for e in epoch if e.method_name == "realloc")
        if count >= 2:
            totals[_site(epoch)] += count
    return dict(totals)


def _shifts(events: Sequence[MethodEvent]) -> dict[Site, int]:
    totals: dict[Site, int] = defaultdict(int)
    for epoch in _epochs(events):
        totals[_site(epoch)] += sum(e.c for e in epoch if e.method_name == "insert")
    minimum = RuleConfig().data_shift_min
    return {site: total for site, total in totals.items() if total >= minimum}


def _copies(events: Sequence[MethodEvent]) -> dict[Site, int]:
    totals: dict[Site, int] = defaultdict(int)
    for epoch in _epochs(events):
        count = sum(1 for e in epoch if e.method_name == "push_back" and e.c == 1)
        if count:
            totals[_site(epoch)] += count
    return dict(totals)


def _double_lookups(events: Sequence[MethodEvent]) -> dict[Site, int]:
    lookups = ("count", "find", "subscript")
    totals: dict[Site, int] = defaultdict(int)
    for epoch in _epochs(events):
        if epoch[0].class_name not in ("map", "unordered_map"):
            continue
        count = sum(
            1
            for first, second in zip(epoch, epoch[1:], strict=False)
            if first.method_name in ("count", "find")
            and second.method_name in lookups
            and second.a == first.a
        )
        if count:
            totals[_site(epoch)] += count
    return dict(totals)


@pytest.fixture(scope="module")
def corpus_run(tmp_path_factory: pytest.TempPathFactory) -> CorpusRun:
    """Every positive program run into one log."""
    path = tmp_path_factory.mktemp("oracle") / "corpus.w1log"
    return run_programs(positive_programs(), path)


class TestAggregationOracle:
    """Finding aggregates equal counts taken straight from the event list."""

    @pytest.mark.parametrize(
        ("rule", "oracle"),
        [
            (RuleId.GROWTH_REALLOC, _reallocs),
            (RuleId.DATA_SHIFT, _shifts),
            (RuleId.PUSH_BACK_COPY, _copies),
            (RuleId.DOUBLE_LOOKUP, _double_lookups),
        ],
    )
    def test_aggregates_match(
        self,
        corpus_run: CorpusRun,
        rule: RuleId,
        oracle: Callable[[Sequence[MethodEvent]], dict[Site, int]],
    ) -> None:
        expected = oracle(corpus_run.db.events)
        actual = {(f.site, f.class_name): f.aggregate for f in corpus_run.fired(rule)}
        assert expected
        assert actual == expected
