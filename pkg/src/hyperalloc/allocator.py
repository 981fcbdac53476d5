"""Schedule perturbation accounting and the allocation decision rule.

Each node owns a time-ordered, non-overlapping schedule.  Inserting a new
task claims the earliest instant allowed by its arrival and time window;
entries that have not started by the arrival instant may be displaced,
and displacement cascades strictly rightward (no entry ever moves
earlier, nothing is preempted).  Waiting forced by a time window is
materialised as an explicit idle entry so the gap stays visible in the
final schedule.

A decision ranks candidate nodes by combined subspace score, preferring,
among the best, candidates that perturb nothing, and otherwise the one
whose perturbation loss is smallest; remaining ties go to the lowest node
index.  The loss of a candidate is the summed strict score drop over the
entries its insertion would shift.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import HyperallocError
from .subspaces import SubspaceScore, combine_scores

IDLE_TASK = "idle"

# decision rationale codes
MAX_SCORE = "max-score"
NON_PERTURBING = "non-perturbing"
MIN_LOSS = "min-loss"
NO_CAPABLE_NODE = "no-capable-node"


class WindowViolation(HyperallocError):
    """Insertion would finish the task after its deadline."""


@dataclass
class ScheduleEntry:
    task: str
    t_s: float
    t_e: float
    forced_idle: bool = False
    score: float = 0.0

    @property
    def duration(self) -> float:
        return self.t_e - self.t_s


@dataclass
class ImpactReport:
    """Effect of inserting one task into one node's schedule.

    ``affected`` lists ``(entry index, old start, new start)`` for every
    displaced entry, indices being 1-based positions in the schedule at
    evaluation time.  ``nv`` and ``loss`` are filled by
    :func:`reallocation_loss` once a scorer is available.
    """

    node: str
    start: float
    end: float
    affected: list = field(default_factory=list)
    nv: set = field(default_factory=set)
    loss: float = 0.0
    shifts: list = field(default_factory=list)  # (index, entry, new start)
    rescored: list = field(default_factory=list)  # (index, entry, new start, new score)


@dataclass
class CandidateReport:
    node: str
    node_idx: int
    scores: dict
    combined: float
    admissible: bool
    exclusion: str | None = None
    impact: ImpactReport | None = None
    loss: float = 0.0


@dataclass
class AllocationDecision:
    task: str
    arrival: float
    arrival_idx: int
    chosen: str | None
    rationale: str
    candidates: list


def schedule_impact(schedule, task, duration, arrival, window=(0.0, math.inf), node="") -> ImpactReport:
    """Tentative insertion of ``task`` into a node schedule.

    The task claims the earliest start at or after ``max(arrival,
    window start)`` once every already-started entry has finished.
    Entries starting at or after the arrival instant are displaced
    rightward as needed, in cascade; nothing moves left and running
    entries are never touched.  The schedule itself is not modified.

    Raises WindowViolation when the claimed slot would end after the
    window deadline.
    """
    if not duration > 0:
        raise ValueError(f"duration must be positive, got {duration}")
    lo, hi = window
    earliest = max(arrival, lo)
    busy_end = max((e.t_e for e in schedule if e.t_s < arrival), default=0.0)
    start = max(earliest, busy_end)
    end = start + duration
    if end > hi:
        raise WindowViolation(f"task {task} would end at {end}, after deadline {hi}")

    report = ImpactReport(node=node, start=start, end=end)
    frontier = end
    for i, entry in enumerate(schedule):
        if entry.t_s < arrival or entry.t_e <= start:
            continue  # already running, or finished before the new slot
        if entry.t_s < frontier:
            new_start = frontier
            report.affected.append((i + 1, entry.t_s, new_start))
            report.shifts.append((i + 1, entry, new_start))
            frontier = new_start + entry.duration
        else:
            frontier = entry.t_e
    return report


def reallocation_loss(report: ImpactReport, scorer) -> float:
    """Score the shifted entries and sum the strict drops.

    ``scorer(entry, new_start)`` returns the entry's combined score at
    its shifted position.  Entries whose score strictly drops form the
    report's ``nv`` set; the loss is the summed drop over that set.
    """
    nv = set()
    loss = 0.0
    rescored = []
    for index, entry, new_start in report.shifts:
        new_score = scorer(entry, new_start)
        rescored.append((index, entry, new_start, new_score))
        if new_score < entry.score:
            nv.add(index)
            loss += entry.score - new_score
    report.nv = nv
    report.loss = loss
    report.rescored = rescored
    return loss


def _is_non_perturbing(candidate: CandidateReport) -> bool:
    return not candidate.impact.affected or not candidate.impact.nv


def allocate(task, arrival, arrival_idx, candidates, score_fn, duration_fn, window, schedules, rescore_fn) -> AllocationDecision:
    """Pick a node for one arriving task.

    ``candidates`` is a sequence of (label, node index) pairs;
    ``score_fn(task, label, arrival_idx)`` returns the per-subspace score
    mapping, ``duration_fn(task, label)`` the busy time the task would
    occupy on that node.  Candidates scoring zero or violating the task
    window are recorded but inadmissible.  Among admissible candidates
    the maximal combined score wins; score ties prefer non-perturbing
    placements, then strictly minimal loss, then the lowest node index.
    """
    reports = []
    for label, idx in sorted(candidates, key=lambda c: c[1]):
        scores = score_fn(task, label, arrival_idx)
        combined = combine_scores([SubspaceScore(s, v) for s, v in scores.items()])
        if combined == 0:
            reports.append(CandidateReport(label, idx, scores, combined, False, "zero-score"))
            continue
        duration = duration_fn(task, label)
        try:
            impact = schedule_impact(schedules[label], task, duration, arrival, window, node=label)
        except WindowViolation:
            reports.append(CandidateReport(label, idx, scores, combined, False, "window-violation"))
            continue
        loss = reallocation_loss(impact, rescore_fn)
        reports.append(CandidateReport(label, idx, scores, combined, True, None, impact, loss))

    admissible = [c for c in reports if c.admissible]
    if not admissible:
        return AllocationDecision(task, arrival, arrival_idx, None, NO_CAPABLE_NODE, reports)

    best = max(c.combined for c in admissible)
    top = [c for c in admissible if c.combined == best]
    if len(top) == 1:
        return AllocationDecision(task, arrival, arrival_idx, top[0].node, MAX_SCORE, reports)
    quiet = [c for c in top if _is_non_perturbing(c)]
    if quiet:
        return AllocationDecision(task, arrival, arrival_idx, quiet[0].node, NON_PERTURBING, reports)
    least = min(c.loss for c in top)
    chosen = next(c for c in top if c.loss == least)
    return AllocationDecision(task, arrival, arrival_idx, chosen.node, MIN_LOSS, reports)


def commit_decision(decision: AllocationDecision, schedules) -> None:
    """Apply a decision to the schedules: shifts, idle filler, insertion."""
    if decision.chosen is None:
        return
    winner = next(c for c in decision.candidates if c.node == decision.chosen)
    impact = winner.impact
    schedule = schedules[winner.node]
    for _, entry, new_start, new_score in impact.rescored:
        length = entry.duration
        entry.t_s = new_start
        entry.t_e = new_start + length
        entry.score = new_score

    ends_before = [e.t_e for e in schedule if e.t_e <= impact.start]
    waited_from = max(ends_before + [decision.arrival])
    if waited_from < impact.start:
        schedule.append(ScheduleEntry(IDLE_TASK, waited_from, impact.start, forced_idle=True))
    schedule.append(ScheduleEntry(decision.task, impact.start, impact.end, score=winner.combined))
    schedule.sort(key=lambda e: e.t_s)


def run_arrivals(arrivals, nodes, candidates_fn, score_fn, duration_fn, window_fn, rescore_fn):
    """Process a time-ordered arrival sequence against empty schedules.

    ``arrivals`` is a sequence of (time, task); ``nodes`` a sequence of
    (label, node index).  Returns the decision list (rejections
    included; rejected tasks are not re-queued) and the final schedules
    keyed by node label.
    """
    times = [t for t, _ in arrivals]
    if times != sorted(times):
        raise ValueError("arrivals must be ordered by time")
    schedules = {label: [] for label, _ in nodes}
    decisions = []
    for i, (t, task) in enumerate(arrivals):
        decision = allocate(
            task,
            t,
            i,
            candidates_fn(task),
            score_fn,
            duration_fn,
            window_fn(task),
            schedules,
            rescore_fn,
        )
        commit_decision(decision, schedules)
        decisions.append(decision)
    return decisions, schedules
