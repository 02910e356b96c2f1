import sys
from datetime import date
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from regsom.register import MonthObservation, RegistrationRecord


def make_record(person_id="p1", region="nord", entry="1994-01-01",
                exit="1994-12-31", reason="end_of_contract", exit_type="job",
                seniority=2.0, age=30.0, education="secondary", skill="empq",
                children=0, offers=1, hour_range="unknown", occasional=()):
    return RegistrationRecord(
        person_id=person_id, region=region,
        entry_date=date.fromisoformat(entry),
        exit_date=date.fromisoformat(exit) if exit else None,
        reason=reason, exit_type=exit_type, seniority=seniority, age=age,
        education=education, skill=skill, children=children, offers=offers,
        hour_range=hour_range, occasional=tuple(occasional))


def months(*triples):
    return tuple(MonthObservation(hours=h, wage=w, spell=s)
                 for h, w, s in triples)


@pytest.fixture(scope="session")
def nord_cohort():
    """Desk-scale Nord cohort shared by the slower tests."""
    from regsom import register, synth
    spec = synth.bundled_spec("nord")
    records = synth.generate(spec)
    individuals = register.collate(records, spec.window_end)
    features = [register.build_features(i) for i in individuals]
    X = np.array([f.as_tuple() for f in features])
    return {"spec": spec, "records": records, "individuals": individuals,
            "features": features, "X": X}
