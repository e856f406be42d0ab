"""Standard views, acquisition grading, session logs and study arithmetic.

The aggregation functions reproduce the study bookkeeping: per-operator
good/acceptable proportions (displayed at one decimal), a Pearson
chi-square two-proportion comparison, and per-question order statistics
for the 0..4 questionnaire.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .chain import bundled_config_path
from .errors import InvalidAnswer, InvalidConfig, ParseError, TickRegression
from .surface import ContactPose, pose_from_contact
from .transforms import Pose, quat_angle

VIEW_NAMES = (
    "pancreas TS",
    "left lobe liver TS",
    "right lobe liver TS",
    "right lobe liver with right kidney",
    "gallbladder LS",
    "aorta at coeliac axis",
    "aorta mid-abdominal",
)

GRADES = ("good", "acceptable", "poor")
OPERATORS = ("sonographer", "robot")
QUESTION_KEYS = ("Q1", "Q2", "Q3", "Q4", "Q5", "Q6", "Q7")
ROBOT_VERSIONS = ("v2", "v3")
EVENT_KINDS = ("command", "telemetry", "grade", "safety", "questionnaire")


@dataclass(frozen=True)
class StandardView:
    """A named diagnostic placement: target contact region + force window."""

    name: str
    contact: ContactPose
    position_tolerance: float
    orientation_tolerance: float
    force_window: tuple[float, float]

    def __post_init__(self):
        if self.name not in VIEW_NAMES:
            raise InvalidConfig(f"unknown standard view {self.name!r}")
        if self.position_tolerance <= 0 or self.orientation_tolerance <= 0:
            raise InvalidConfig("view tolerances must be > 0")
        lo, hi = self.force_window
        if not lo < hi:
            raise InvalidConfig("force window must satisfy min < max")

    def target_pose(self) -> Pose:
        return pose_from_contact(self.contact)


def load_views(path=None) -> dict[str, StandardView]:
    """Bundled (or custom) standard views keyed by name."""
    if path is None:
        path = bundled_config_path("views", "standard-views.yaml")
    try:
        node = yaml.safe_load(Path(path).read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ParseError(f"cannot load views {path}: {exc}") from exc
    views = {}
    for name, v in node["views"].items():
        views[name] = StandardView(
            name=name,
            contact=ContactPose(np.array(v["surface_point"], dtype=float),
                                np.array(v["normal"], dtype=float),
                                float(v.get("indentation", 0.0)),
                                float(v.get("axial_roll", 0.0))),
            position_tolerance=float(v["position_tolerance"]),
            orientation_tolerance=float(v["orientation_tolerance"]),
            force_window=(float(v["force_window"][0]),
                          float(v["force_window"][1])))
    return views


def load_questionnaire(path=None) -> dict[str, str]:
    """Q1..Q7 statement texts from the bundled schema."""
    if path is None:
        path = bundled_config_path("questionnaire", "questions.yaml")
    node = yaml.safe_load(Path(path).read_text())
    return {k: str(node["questions"][k]) for k in QUESTION_KEYS}


@dataclass(frozen=True)
class GradeRecord:
    view: str
    operator: str
    grade: str
    position_error: float
    orientation_error: float
    normal_force: float
    tick: int = 0

    def __post_init__(self):
        if self.grade not in GRADES:
            raise InvalidConfig(f"grade must be one of {GRADES}")
        if self.operator not in OPERATORS:
            raise InvalidConfig(f"operator must be one of {OPERATORS}")


def grade_acquisition(view: StandardView, achieved: Pose,
                      normal_force: float, operator: str = "robot",
                      tick: int = 0) -> GradeRecord:
    """Three-level rubric over pose error and contact force.

    good: pose error within half tolerance and force inside the window;
    acceptable: within full tolerance and force within the window +/-20%;
    otherwise poor.
    """
    target = view.target_pose()
    pos_err = float(np.linalg.norm(achieved.position - target.position))
    rot_err = quat_angle(achieved.orientation, target.orientation)
    lo, hi = view.force_window
    in_window = lo <= normal_force <= hi
    in_slack = 0.8 * lo <= normal_force <= 1.2 * hi
    if (pos_err <= 0.5 * view.position_tolerance
            and rot_err <= 0.5 * view.orientation_tolerance and in_window):
        grade = "good"
    elif (pos_err <= view.position_tolerance
          and rot_err <= view.orientation_tolerance and in_slack):
        grade = "acceptable"
    else:
        grade = "poor"
    return GradeRecord(view.name, operator, grade, pos_err, rot_err,
                       float(normal_force), tick)


@dataclass(frozen=True)
class OperatorSummary:
    count: int
    good: int
    acceptable: int
    poor: int

    @property
    def good_or_acceptable(self) -> int:
        return self.good + self.acceptable

    @property
    def good_or_acceptable_fraction(self) -> float | None:
        if self.count == 0:
            return None
        return self.good_or_acceptable / self.count

    @property
    def good_among_ok_fraction(self) -> float | None:
        if self.good_or_acceptable == 0:
            return None
        return self.good / self.good_or_acceptable


def display_percent(fraction: float | None) -> str:
    """One-decimal percent for report tables; 'n/a' for empty groups."""
    if fraction is None:
        return "n/a"
    return f"{fraction * 100.0:.1f}%"


def summarize_grades(records) -> dict[str, OperatorSummary]:
    """Counts and fractions per operator (zero rows for absent operators)."""
    out = {}
    for op in OPERATORS:
        subset = [r for r in records if r.operator == op]
        out[op] = OperatorSummary(
            count=len(subset),
            good=sum(r.grade == "good" for r in subset),
            acceptable=sum(r.grade == "acceptable" for r in subset),
            poor=sum(r.grade == "poor" for r in subset))
    return out


def compare_proportions(a_success: int, a_total: int, b_success: int,
                        b_total: int) -> tuple[float, float]:
    """Pearson chi-square (no continuity correction) on a 2x2 table.

    Returns (statistic, p) with p from the chi-square(1) survival
    function. Degenerate tables (a zero row or column) return (0.0, 1.0)
    by convention.
    """
    if a_total <= 0 or b_total <= 0:
        raise ValueError("group totals must be positive")
    if not (0 <= a_success <= a_total and 0 <= b_success <= b_total):
        raise ValueError("successes must lie within their totals")
    table = np.array([[a_success, a_total - a_success],
                      [b_success, b_total - b_success]], dtype=float)
    rows = table.sum(axis=1)
    cols = table.sum(axis=0)
    if (rows == 0).any() or (cols == 0).any():
        return 0.0, 1.0
    expected = np.outer(rows, cols) / table.sum()
    stat = float(((table - expected) ** 2 / expected).sum())
    # Chi-square(1) survival function, exact via the error function.
    p = math.erfc(math.sqrt(stat / 2.0))
    return stat, p


@dataclass(frozen=True)
class QuestionnaireResponse:
    volunteer_id: str
    robot_version: str
    answers: tuple[int, ...]  # Q1..Q7, each 0..4

    def __post_init__(self):
        object.__setattr__(self, "answers", tuple(int(a)
                                                  for a in self.answers))
        if self.robot_version not in ROBOT_VERSIONS:
            raise InvalidAnswer(
                f"robot version must be one of {ROBOT_VERSIONS}")
        if len(self.answers) != len(QUESTION_KEYS):
            raise InvalidAnswer("exactly seven answers required")
        if any(a < 0 or a > 4 for a in self.answers):
            raise InvalidAnswer("answers must be integers in 0..4")


@dataclass(frozen=True)
class QuestionStats:
    median: int
    q1: int
    q3: int
    min: int
    max: int
    counts: tuple[int, ...]  # per level 0..4

    @property
    def iqr(self) -> int:
        return self.q3 - self.q1


def _lower_order_stat(sorted_vals, fraction: float) -> int:
    # Lower-median convention generalized to quartiles.
    idx = int(math.floor((len(sorted_vals) - 1) * fraction))
    return int(sorted_vals[idx])


def summarize_questionnaire(responses) -> dict[str, dict[str, QuestionStats]]:
    """Order statistics per robot version per question.

    Medians/quartiles use the lower order statistic for even counts.
    """
    out: dict[str, dict[str, QuestionStats]] = {}
    for version in ROBOT_VERSIONS:
        subset = [r for r in responses if r.robot_version == version]
        if not subset:
            continue
        per_q = {}
        for qi, key in enumerate(QUESTION_KEYS):
            vals = sorted(r.answers[qi] for r in subset)
            counts = tuple(sum(v == level for v in vals) for level in range(5))
            per_q[key] = QuestionStats(
                median=_lower_order_stat(vals, 0.5),
                q1=_lower_order_stat(vals, 0.25),
                q3=_lower_order_stat(vals, 0.75),
                min=vals[0], max=vals[-1], counts=counts)
        out[version] = per_q
    return out


# ---------------------------------------------------------------------------
# Session log


@dataclass(frozen=True)
class SessionEvent:
    tick: int
    kind: str
    payload: dict

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise InvalidConfig(f"unknown event kind {self.kind!r}")


@dataclass
class SessionLog:
    """Append-only, tick-ordered event log."""

    events: list[SessionEvent] = field(default_factory=list)

    def last_tick(self) -> int:
        return self.events[-1].tick if self.events else -1


def append_event(log: SessionLog, event: SessionEvent) -> SessionLog:
    """Append one event; ticks must be non-decreasing."""
    if event.tick < log.last_tick():
        raise TickRegression(
            f"event tick {event.tick} precedes log tail {log.last_tick()}")
    log.events.append(event)
    return log


def _canonical(obj):
    """JSON with sorted keys and repr-exact floats for byte-stable logs."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def save_session(log: SessionLog, path) -> None:
    with open(path, "w") as fh:
        for ev in log.events:
            fh.write(_canonical({"tick": ev.tick, "kind": ev.kind,
                                 "payload": ev.payload}) + "\n")


def session_to_bytes(log: SessionLog) -> bytes:
    return "".join(
        _canonical({"tick": ev.tick, "kind": ev.kind, "payload": ev.payload})
        + "\n" for ev in log.events).encode()


def load_session(path) -> SessionLog:
    log = SessionLog()
    try:
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                rec = json.loads(line)
                append_event(log, SessionEvent(int(rec["tick"]),
                                               str(rec["kind"]),
                                               rec["payload"]))
    except (OSError, ValueError, KeyError) as exc:
        raise ParseError(f"cannot load session log {path}: {exc}") from exc
    return log


def grades_from_log(log: SessionLog) -> list[GradeRecord]:
    records = []
    for ev in log.events:
        if ev.kind != "grade":
            continue
        p = ev.payload
        records.append(GradeRecord(
            view=p["view"], operator=p["operator"], grade=p["grade"],
            position_error=float(p["position_error"]),
            orientation_error=float(p["orientation_error"]),
            normal_force=float(p["normal_force"]), tick=ev.tick))
    return records


def questionnaires_from_log(log: SessionLog) -> list[QuestionnaireResponse]:
    out = []
    for ev in log.events:
        if ev.kind != "questionnaire":
            continue
        p = ev.payload
        out.append(QuestionnaireResponse(str(p["volunteer_id"]),
                                         str(p["robot_version"]),
                                         tuple(p["answers"])))
    return out


def build_report(log: SessionLog) -> dict:
    """Machine-readable report: grade tables, chi-squares, questionnaire."""
    grades = grades_from_log(log)
    summary = summarize_grades(grades)
    report: dict = {"grades": {}}
    for op, s in summary.items():
        report["grades"][op] = {
            "count": s.count, "good": s.good, "acceptable": s.acceptable,
            "poor": s.poor,
            "good_or_acceptable_percent":
                display_percent(s.good_or_acceptable_fraction),
            "good_among_ok_percent":
                display_percent(s.good_among_ok_fraction),
        }
    son = summary["sonographer"]
    rob = summary["robot"]
    comparisons = {}
    if son.count and rob.count:
        stat, p = compare_proportions(son.good_or_acceptable, son.count,
                                      rob.good_or_acceptable, rob.count)
        comparisons["good_or_acceptable"] = {"chi_square": stat, "p": p}
        if son.good_or_acceptable and rob.good_or_acceptable:
            stat, p = compare_proportions(son.good, son.good_or_acceptable,
                                          rob.good, rob.good_or_acceptable)
            comparisons["good_among_ok"] = {"chi_square": stat, "p": p}
    report["comparisons"] = comparisons
    questionnaire = summarize_questionnaire(questionnaires_from_log(log))
    report["questionnaire"] = {
        version: {key: {"median": st.median, "q1": st.q1, "q3": st.q3,
                        "min": st.min, "max": st.max,
                        "counts": list(st.counts)}
                  for key, st in per_q.items()}
        for version, per_q in questionnaire.items()}
    return report


def format_report(report: dict) -> str:
    """Plain-text tables mirroring the machine-readable report."""
    lines = ["image quality by operator"]
    for op in OPERATORS:
        g = report["grades"][op]
        lines.append(
            f"  {op}: n={g['count']} good={g['good']} "
            f"acceptable={g['acceptable']} poor={g['poor']} "
            f"good-or-acceptable={g['good_or_acceptable_percent']} "
            f"good-among-ok={g['good_among_ok_percent']}")
    for name, c in report["comparisons"].items():
        p = c["p"]
        p_text = "p < 0.001" if p < 0.001 else f"p = {p:.3f}"
        lines.append(f"  {name}: chi-square {c['chi_square']:.3f}, {p_text}")
    if report["questionnaire"]:
        lines.append("questionnaire (median [q1..q3] min..max)")
        for version, per_q in sorted(report["questionnaire"].items()):
            for key in QUESTION_KEYS:
                if key not in per_q:
                    continue
                st = per_q[key]
                lines.append(
                    f"  {version} {key}: {st['median']} "
                    f"[{st['q1']}..{st['q3']}] {st['min']}..{st['max']} "
                    f"counts={st['counts']}")
    return "\n".join(lines) + "\n"
