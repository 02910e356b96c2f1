"""Register ingestion: collate registrations per person, impute occasional-work
hours, and build the quantitative and qualitative classification variables.

One person can hold several registration spells (recurrence of unemployment).
Durations, occasional-work months, spell counts and job offers are cumulated
across spells; qualitative attributes and the monthly-hours/wage level are
taken from the latest spell, which is the only one they are observed for.
"""

from __future__ import annotations

import csv
import io
import math
import re
from dataclasses import dataclass, field, replace
from datetime import date

from .errors import DataError

DAYS_PER_MONTH = 30.44
DAYS_PER_YEAR = 365.25

#: end of the observation window; spells without an exit date are measured
#: up to this date.
DEFAULT_WINDOW_END = date(1996, 8, 31)

REASONS = ("end_of_contract", "lay_off", "first_job", "return", "na")
EXIT_TYPES = ("job", "probable_job", "quit", "training", "cancellation",
              "full_time_job_seeker", "none")
EDUCATIONS = ("s4", "s2", "sec_diploma", "secondary", "primary", "none")
SKILLS = ("mano", "ousp", "op12", "o3hq", "emmq", "empq", "tecd", "mait", "cadr")
HOUR_RANGES = ("le78", "gt78", "unknown")

#: the 11 classification variables, in the fixed file/column order.
FEATURE_NAMES = (
    "age",
    "seniority",
    "latest_duration",
    "cumulated_duration",
    "offers_per_month",
    "n_periods",
    "occasional_months_per_unemp_month",
    "occasional_spells_per_year",
    "occasional_spells_per_period",
    "max_hours",
    "max_wage",
)


@dataclass(frozen=True)
class MonthObservation:
    """One month of occasional work inside a registration spell."""

    hours: float | None
    wage: float | None
    spell: int


@dataclass(frozen=True)
class RegistrationRecord:
    """One registered-unemployment spell for one person."""

    person_id: str
    region: str
    entry_date: date
    exit_date: date | None
    reason: str
    exit_type: str
    seniority: float
    age: float
    education: str
    skill: str
    children: int
    offers: int
    hour_range: str
    occasional: tuple[MonthObservation, ...] = ()

    def duration_days(self, window_end: date = DEFAULT_WINDOW_END) -> float:
        end = self.exit_date if self.exit_date is not None else window_end
        return float((end - self.entry_date).days)

    def max_hours(self) -> float:
        return max((m.hours for m in self.occasional if m.hours is not None),
                   default=0.0)

    def max_wage(self) -> float:
        return max((m.wage for m in self.occasional if m.wage is not None),
                   default=0.0)


def validate_record(record: RegistrationRecord,
                    window_end: date = DEFAULT_WINDOW_END) -> None:
    """Check the per-record invariants, raising DataError on violation."""
    if record.exit_date is not None and record.exit_date < record.entry_date:
        raise DataError(f"record {record.person_id}: exit date "
                        f"{record.exit_date} precedes entry {record.entry_date}")
    if record.reason not in REASONS:
        raise DataError(f"record {record.person_id}: unknown reason {record.reason!r}")
    if record.exit_type not in EXIT_TYPES:
        raise DataError(f"record {record.person_id}: unknown exit type "
                        f"{record.exit_type!r}")
    if record.education not in EDUCATIONS:
        raise DataError(f"record {record.person_id}: unknown education "
                        f"{record.education!r}")
    if record.skill not in SKILLS:
        raise DataError(f"record {record.person_id}: unknown skill {record.skill!r}")
    if record.hour_range not in HOUR_RANGES:
        raise DataError(f"record {record.person_id}: unknown hour range "
                        f"{record.hour_range!r}")
    if min(record.seniority, record.age, record.offers, record.children) < 0:
        raise DataError(f"record {record.person_id}: negative quantity")
    # occasional months must fit inside the spell
    months = record.duration_days(window_end) / DAYS_PER_MONTH
    if record.occasional and len(record.occasional) > months + 1:
        raise DataError(f"record {record.person_id}: {len(record.occasional)} "
                        f"occasional months exceed spell length")
    spells = sorted({m.spell for m in record.occasional})
    if spells and spells != list(range(1, len(spells) + 1)):
        raise DataError(f"record {record.person_id}: spell indices {spells} "
                        f"not contiguous from 1")


@dataclass(frozen=True)
class Individual:
    """Person-level record collated over all registration spells."""

    person_id: str
    n_periods: int
    cumulated_duration_days: float
    latest_duration_days: float
    total_occasional_months: float
    total_occasional_spells: int
    total_job_offers: int
    max_monthly_hours: float
    max_monthly_wage: float
    reason: str
    exit_type: str
    education: str
    skill: str
    children: int
    age: float
    seniority: float


@dataclass(frozen=True)
class FeatureVector:
    """The 11 quantitative classification variables, fixed order."""

    age: float
    seniority: float
    latest_duration: float
    cumulated_duration: float
    offers_per_month: float
    n_periods: float
    occasional_months_per_unemp_month: float
    occasional_spells_per_year: float
    occasional_spells_per_period: float
    max_hours: float
    max_wage: float

    def as_tuple(self) -> tuple[float, ...]:
        return tuple(getattr(self, name) for name in FEATURE_NAMES)


# --------------------------------------------------------------------------
# collation
# --------------------------------------------------------------------------

def summarize_occasional(record: RegistrationRecord) -> dict:
    """Summarise one spell's occasional work.

    Hours must be imputed first (no missing values). Months are counted when
    worked hours are positive; spells by distinct spell index.
    """
    for m in record.occasional:
        if m.hours is None:
            raise DataError(f"record {record.person_id}: missing hours, "
                            f"impute before summarising")
    return {
        "max_hours": record.max_hours(),
        "max_wage": record.max_wage(),
        "months_count": sum(1 for m in record.occasional if m.hours > 0),
        "spells_count": len({m.spell for m in record.occasional}),
    }


def collate(records: list[RegistrationRecord],
            window_end: date = DEFAULT_WINDOW_END) -> list[Individual]:
    """Collate registration records into one Individual per person.

    Quantitative fields (durations, occasional months, spell counts, job
    offers) are summed across spells in chronological order. Qualitative
    attributes and the monthly hours/wage level come from the latest spell.
    Overlapping spells for one person reject the whole record set.
    """
    by_person: dict[str, list[RegistrationRecord]] = {}
    for rec in records:
        validate_record(rec, window_end)
        by_person.setdefault(rec.person_id, []).append(rec)

    overlapping = []
    for pid, recs in by_person.items():
        recs.sort(key=lambda r: (r.entry_date, r.exit_date or date.max))
        for prev, cur in zip(recs, recs[1:]):
            prev_end = prev.exit_date if prev.exit_date is not None else window_end
            if cur.entry_date < prev_end:
                overlapping.append(pid)
                break
    if overlapping:
        raise DataError("overlapping registration spells for person ids: "
                        + ", ".join(sorted(overlapping)))

    individuals = []
    for pid, recs in by_person.items():
        cumulated = 0.0
        months = 0.0
        spells = 0
        offers = 0
        for rec in recs:
            summary = summarize_occasional(rec)
            cumulated += rec.duration_days(window_end)
            months += summary["months_count"]
            spells += summary["spells_count"]
            offers += rec.offers
        latest = recs[-1]
        individuals.append(Individual(
            person_id=pid,
            n_periods=len(recs),
            cumulated_duration_days=cumulated,
            latest_duration_days=latest.duration_days(window_end),
            total_occasional_months=months,
            total_occasional_spells=spells,
            total_job_offers=offers,
            max_monthly_hours=latest.max_hours(),
            max_monthly_wage=latest.max_wage(),
            reason=latest.reason,
            exit_type=latest.exit_type,
            education=latest.education,
            skill=latest.skill,
            children=latest.children,
            age=latest.age,
            seniority=latest.seniority,
        ))
    individuals.sort(key=lambda ind: ind.person_id)
    return individuals


# --------------------------------------------------------------------------
# imputation of monthly hours
# --------------------------------------------------------------------------

def compute_class_means(records: list[RegistrationRecord]) -> dict:
    """Mean observed monthly hours per (hour_range, region) class."""
    sums: dict[tuple[str, str], list[float]] = {}
    for rec in records:
        for m in rec.occasional:
            if m.hours is not None:
                sums.setdefault((rec.hour_range, rec.region), []).append(m.hours)
    return {key: sum(vals) / len(vals) for key, vals in sums.items()}


def impute_hours(record: RegistrationRecord,
                 class_means: dict) -> tuple[RegistrationRecord, int]:
    """Replace missing monthly hours by the (hour_range, region) class mean.

    Non-missing values are untouched. Returns the record and the number of
    imputed cells.
    """
    imputed = 0
    months = []
    for m in record.occasional:
        if m.hours is None:
            key = (record.hour_range, record.region)
            if key not in class_means:
                raise DataError(f"no class mean for hour range "
                                f"{record.hour_range!r} in region "
                                f"{record.region!r}")
            months.append(replace(m, hours=class_means[key]))
            imputed += 1
        else:
            months.append(m)
    if imputed == 0:
        return record, 0
    return replace(record, occasional=tuple(months)), imputed


# --------------------------------------------------------------------------
# feature construction
# --------------------------------------------------------------------------

def build_features(individual: Individual) -> FeatureVector:
    """Build the 11 classification variables for one individual.

    Ratios use 30.44 days per month and 365.25 days per year; every ratio is
    zero whenever its numerator total is zero.
    """
    days = individual.cumulated_duration_days
    if days <= 0:
        raise DataError(f"individual {individual.person_id}: zero cumulated "
                        f"duration, degenerate spell")
    months = days / DAYS_PER_MONTH
    years = days / DAYS_PER_YEAR
    return FeatureVector(
        age=individual.age,
        seniority=individual.seniority,
        latest_duration=individual.latest_duration_days,
        cumulated_duration=days,
        offers_per_month=individual.total_job_offers / months,
        n_periods=float(individual.n_periods),
        occasional_months_per_unemp_month=individual.total_occasional_months / months,
        occasional_spells_per_year=individual.total_occasional_spells / years,
        occasional_spells_per_period=(individual.total_occasional_spells
                                      / individual.n_periods),
        max_hours=individual.max_monthly_hours,
        max_wage=individual.max_monthly_wage,
    )


# --------------------------------------------------------------------------
# qualitative profiles
# --------------------------------------------------------------------------

#: canonical category code lists per qualitative variable, fixed order.
QUAL_CODES = {
    "children": ("0enf", "enf"),
    "education": ("form0", "nbacc", "+bacc"),
    "skill": SKILLS,
    "reason": ("fin", "lic", "prem", "repr", "na"),
    "duration": ("inf6", "inf12", "sup12"),
    "exit": ("empl", "pemp", "stag", "retr", "susp", "fjob", "none"),
    "recurrence": ("rec1", "rec2", "rec3"),
    "hours": ("0ar", "arm39", "ar78", "ar117", "arp117"),
    "share": ("0par", "01par", "13par", "p3par"),
    "spells_year": ("0peran", "m1peran", "12peran", "p2peran"),
    "super": tuple(f"sc{i}" for i in range(1, 11)),
    "age": ("m25", "25a35", "35a45", "45a55", "p55"),
}

#: default active variable set for the correspondence analysis; "age" is the
#: supplementary variable.
ACTIVE_VARS = ("children", "education", "skill", "reason", "duration", "exit",
               "recurrence", "hours", "share", "spells_year", "super")

_EDUCATION_CODE = {
    "s4": "+bacc", "s2": "+bacc", "sec_diploma": "nbacc",
    "secondary": "form0", "primary": "form0", "none": "form0",
}
_REASON_CODE = {
    "end_of_contract": "fin", "lay_off": "lic", "first_job": "prem",
    "return": "repr", "na": "na",
}
_EXIT_CODE = {
    "job": "empl", "probable_job": "pemp", "training": "stag",
    "quit": "retr", "cancellation": "susp", "full_time_job_seeker": "fjob",
    "none": "none",
}


@dataclass(frozen=True)
class QualProfile:
    """Categorical codes for the correspondence analysis, one per variable."""

    children: str
    education: str
    skill: str
    reason: str
    duration: str
    exit: str
    recurrence: str
    hours: str
    share: str
    spells_year: str
    super_class: int
    age: str  # supplementary

    def code(self, var: str) -> str:
        if var == "super":
            return f"sc{self.super_class}"
        return getattr(self, var)


def bracket_code(value: float, codes, edges, zero_code: str | None = None) -> str:
    """Map a value onto bracket codes; the shared edge belongs to the lower
    bracket (value <= edge), and exact zero takes zero_code when given."""
    if zero_code is not None and value == 0:
        return zero_code
    for code, edge in zip(codes, edges):
        if value <= edge:
            return code
    return codes[len(edges)]


def bracketize(individual: Individual, features: FeatureVector,
               super_class: int) -> QualProfile:
    """Discretise an individual into the qualitative profile codes."""
    if not 1 <= super_class <= 10:
        raise DataError(f"super class {super_class} outside 1..10")
    months_latest = features.latest_duration / DAYS_PER_MONTH
    return QualProfile(
        children="0enf" if individual.children == 0 else "enf",
        education=_EDUCATION_CODE[individual.education],
        skill=individual.skill,
        reason=_REASON_CODE[individual.reason],
        duration=bracket_code(months_latest, ("inf6", "inf12", "sup12"), (6.0, 12.0)),
        exit=_EXIT_CODE[individual.exit_type],
        recurrence=("rec1" if individual.n_periods == 1
                    else "rec2" if individual.n_periods == 2 else "rec3"),
        hours=bracket_code(features.max_hours,
                           ("arm39", "ar78", "ar117", "arp117"),
                           (39.0, 78.0, 117.0), zero_code="0ar"),
        share=bracket_code(features.occasional_months_per_unemp_month,
                           ("01par", "13par", "p3par"),
                           (0.1, 0.3), zero_code="0par"),
        spells_year=bracket_code(features.occasional_spells_per_year,
                                 ("m1peran", "12peran", "p2peran"),
                                 (1.0, 2.0), zero_code="0peran"),
        super_class=super_class,
        age=bracket_code(features.age, ("m25", "25a35", "35a45", "45a55", "p55"),
                         (25.0, 35.0, 45.0, 55.0)),
    )


# --------------------------------------------------------------------------
# delimited-text I/O
# --------------------------------------------------------------------------

_FIXED_COLUMNS = ("person_id", "region", "entry_date", "exit_date", "reason",
                  "exit_type", "seniority", "age", "education", "skill",
                  "children", "offers", "hour_range")
_MONTH_COL = re.compile(r"m(\d+)_(hours|wage|spell)$")


def _fmt(value: float) -> str:
    """Shortest exact decimal form; round-trips float64."""
    if value == int(value) and abs(value) < 1e15:
        return str(int(value))
    return repr(value)


def write_records(records: list[RegistrationRecord], path) -> None:
    n_months = max((len(r.occasional) for r in records), default=0)
    header = list(_FIXED_COLUMNS)
    for k in range(1, n_months + 1):
        header += [f"m{k}_hours", f"m{k}_wage", f"m{k}_spell"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for r in records:
            row = [r.person_id, r.region, r.entry_date.isoformat(),
                   r.exit_date.isoformat() if r.exit_date else "",
                   r.reason, r.exit_type, _fmt(r.seniority), _fmt(r.age),
                   r.education, r.skill, str(r.children), str(r.offers),
                   r.hour_range]
            for m in r.occasional:
                row += ["" if m.hours is None else _fmt(m.hours),
                        "" if m.wage is None else _fmt(m.wage),
                        str(m.spell)]
            row += [""] * (3 * (n_months - len(r.occasional)))
            writer.writerow(row)


def read_records(path) -> list[RegistrationRecord]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty register file")
        if header[:len(_FIXED_COLUMNS)] != list(_FIXED_COLUMNS):
            raise DataError(f"{path}: unexpected register header")
        month_slots = []
        for idx, col in enumerate(header[len(_FIXED_COLUMNS):],
                                  start=len(_FIXED_COLUMNS)):
            if not _MONTH_COL.match(col):
                raise DataError(f"{path}: unexpected column {col!r}")
            month_slots.append(idx)
        if len(month_slots) % 3:
            raise DataError(f"{path}: month columns not in hours/wage/spell triples")

        records = []
        for line, row in enumerate(reader, start=2):
            try:
                rec = _parse_row(row, len(month_slots) // 3)
            except (ValueError, IndexError) as exc:
                raise DataError(f"{path}:{line}: {exc}") from exc
            records.append(rec)
    return records


def _parse_row(row: list[str], n_months: int) -> RegistrationRecord:
    months = []
    base = len(_FIXED_COLUMNS)
    for k in range(n_months):
        hours, wage, spell = row[base + 3 * k: base + 3 * k + 3]
        if hours == "" and wage == "" and spell == "":
            continue
        if spell == "":
            raise ValueError(f"month observation {k + 1} lacks a spell index")
        months.append(MonthObservation(
            hours=None if hours == "" else float(hours),
            wage=None if wage == "" else float(wage),
            spell=int(spell),
        ))
    return RegistrationRecord(
        person_id=row[0],
        region=row[1],
        entry_date=date.fromisoformat(row[2]),
        exit_date=date.fromisoformat(row[3]) if row[3] else None,
        reason=row[4],
        exit_type=row[5],
        seniority=float(row[6]),
        age=float(row[7]),
        education=row[8],
        skill=row[9],
        children=int(row[10]),
        offers=int(row[11]),
        hour_range=row[12],
        occasional=tuple(months),
    )


_INDIVIDUAL_COLUMNS = ("person_id", "n_periods", "cumulated_duration_days",
                       "latest_duration_days", "total_occasional_months",
                       "total_occasional_spells", "total_job_offers",
                       "max_monthly_hours", "max_monthly_wage", "reason",
                       "exit_type", "education", "skill", "children", "age",
                       "seniority")


def write_individuals(individuals: list[Individual], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_INDIVIDUAL_COLUMNS)
        for ind in individuals:
            writer.writerow([
                ind.person_id, str(ind.n_periods),
                _fmt(ind.cumulated_duration_days), _fmt(ind.latest_duration_days),
                _fmt(ind.total_occasional_months), str(ind.total_occasional_spells),
                str(ind.total_job_offers), _fmt(ind.max_monthly_hours),
                _fmt(ind.max_monthly_wage), ind.reason, ind.exit_type,
                ind.education, ind.skill, str(ind.children), _fmt(ind.age),
                _fmt(ind.seniority),
            ])


def read_individuals(path) -> list[Individual]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != list(_INDIVIDUAL_COLUMNS):
            raise DataError(f"{path}: unexpected individuals header")
        out = []
        for row in reader:
            out.append(Individual(
                person_id=row[0], n_periods=int(row[1]),
                cumulated_duration_days=float(row[2]),
                latest_duration_days=float(row[3]),
                total_occasional_months=float(row[4]),
                total_occasional_spells=int(row[5]),
                total_job_offers=int(row[6]),
                max_monthly_hours=float(row[7]),
                max_monthly_wage=float(row[8]),
                reason=row[9], exit_type=row[10], education=row[11],
                skill=row[12], children=int(row[13]), age=float(row[14]),
                seniority=float(row[15]),
            ))
    return out


def write_features(person_ids: list[str], features: list[FeatureVector],
                   path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("person_id",) + FEATURE_NAMES)
        for pid, feat in zip(person_ids, features):
            writer.writerow([pid] + [_fmt(v) for v in feat.as_tuple()])


def read_features(path) -> tuple[list[str], list[FeatureVector]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["person_id"] + list(FEATURE_NAMES):
            raise DataError(f"{path}: unexpected features header")
        ids, feats = [], []
        for row in reader:
            ids.append(row[0])
            feats.append(FeatureVector(*[float(v) for v in row[1:]]))
    return ids, feats
