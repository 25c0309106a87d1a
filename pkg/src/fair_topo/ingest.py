"""Senate roll-call ingestion into a state-level observation matrix.

Input files follow the public Voteview CSV layout:

* members: ``congress, chamber, icpsr, state_abbrev, party_code`` (extra
  columns ignored). The President appears with ``chamber == "President"``.
* votes: ``congress, chamber, rollnumber, icpsr, cast_code``.

Row 0 of the output is the President; rows 1..50 are states in
alphabetical order of their postal abbreviation, each the sum of its two
senators' coded votes.
"""

from __future__ import annotations

import csv
import logging
from collections import Counter, defaultdict
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from fair_topo.csvio import CsvFormatError, write_groups, write_matrix
from fair_topo.graph_core import GroupAssignment
from fair_topo.seeding import rng_for

log = logging.getLogger(__name__)

DEMOCRATIC, REPUBLICAN, MIXED = 0, 1, 2
GROUP_NAMES = ("Democratic", "Republican", "Mixed")
_PARTY = {100: DEMOCRATIC, 200: REPUBLICAN}
YEA_CODES = frozenset({1, 2, 3})
NAY_CODES = frozenset({4, 5, 6})

MEMBER_COLUMNS = ("congress", "chamber", "icpsr", "state_abbrev", "party_code")
VOTE_COLUMNS = ("congress", "chamber", "rollnumber", "icpsr", "cast_code")

STATES = (
    "AK", "AL", "AR", "AZ", "CA", "CO", "CT", "DE", "FL", "GA", "HI", "IA", "ID", "IL", "IN", "KS", "KY",
    "LA", "MA", "MD", "ME", "MI", "MN", "MO", "MS", "MT", "NC", "ND", "NE", "NH", "NJ", "NM", "NV", "NY",
    "OH", "OK", "OR", "PA", "RI", "SC", "SD", "TN", "TX", "UT", "VA", "VT", "WA", "WI", "WV", "WY",
)


def code_vote(cast_code: int) -> int:
    """Yea variants map to +1, nay variants to -1, anything else to 0."""
    if cast_code in YEA_CODES:
        return 1
    if cast_code in NAY_CODES:
        return -1
    return 0


@dataclass(frozen=True)
class SenateDataset:
    x: np.ndarray
    groups: GroupAssignment
    vote_count: int
    congress: int
    row_names: tuple = ()

    def __post_init__(self):
        if self.x.shape != (self.groups.n, self.vote_count):
            raise ValueError("x must be nodes x votes")


def _read_table(path: Path | str, required: tuple) -> list[dict]:
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise CsvFormatError(path, 1, 1, "missing header row")
        missing = [c for c in required if c not in reader.fieldnames]
        if missing:
            raise CsvFormatError(path, 1, 1, f"missing columns {missing}")
        cols = {c: reader.fieldnames.index(c) + 1 for c in required}
        rows = []
        for line, rec in enumerate(reader, start=2):
            row = {}
            for c in required:
                val = (rec.get(c) or "").strip()
                if c in ("chamber", "state_abbrev"):
                    row[c] = val
                    continue
                try:
                    row[c] = int(float(val))
                except ValueError:
                    raise CsvFormatError(path, line, cols[c], f"{c} is not a number: {val!r}") from None
            rows.append(row)
    return rows


def _party_group(code: int) -> int:
    if code not in _PARTY:
        log.warning("party code %d is neither Democratic nor Republican; treated as Mixed", code)
        return MIXED
    return _PARTY[code]


def ingest_rollcalls(votes_file: Path | str, members_file: Path | str, congress: int = 113) -> SenateDataset:
    members = [m for m in _read_table(members_file, MEMBER_COLUMNS) if m["congress"] == congress]
    votes = [
        v for v in _read_table(votes_file, VOTE_COLUMNS)
        if v["congress"] == congress and v["chamber"] in ("Senate", "President")
    ]
    presidents = sorted({m["icpsr"] for m in members if m["chamber"] == "President"})
    if len(presidents) != 1:
        raise ValueError(f"expected one President in congress {congress}, found {len(presidents)}")
    president = presidents[0]
    pres_party = next(m["party_code"] for m in members if m["icpsr"] == president)

    senate_rolls = sorted({v["rollnumber"] for v in votes if v["chamber"] == "Senate"})
    if not senate_rolls:
        raise ValueError(f"no Senate roll calls for congress {congress}")
    col = {r: j for j, r in enumerate(senate_rolls)}
    recorded = Counter(v["icpsr"] for v in votes if v["chamber"] == "Senate")

    by_state: dict[str, dict[int, int]] = defaultdict(dict)
    for m in members:
        if m["chamber"] == "Senate":
            by_state[m["state_abbrev"]][m["icpsr"]] = m["party_code"]
    states = sorted(by_state)
    if len(states) != 50:
        log.warning("found %d states with senators, expected 50", len(states))

    rows = {president: 0}
    labels = [_party_group(pres_party)]
    for i, st in enumerate(states, start=1):
        ids = sorted(by_state[st], key=lambda k: (-recorded[k], k))
        if len(ids) != 2:
            log.warning("%s has %d senators; keeping the two with most recorded votes: %s", st, len(ids), ids[:2])
        if len(ids) < 2:
            raise ValueError(f"{st} has fewer than two senators")
        kept = ids[:2]
        for k in kept:
            rows[k] = i
        parties = {_party_group(by_state[st][k]) for k in kept}
        labels.append(parties.pop() if len(parties) == 1 else MIXED)

    x = np.zeros((len(states) + 1, len(senate_rolls)))
    for v in votes:
        r, j = rows.get(v["icpsr"]), col.get(v["rollnumber"])
        if r is None or j is None:
            continue
        x[r, j] += code_vote(v["cast_code"])
    groups = GroupAssignment(np.asarray(labels), 3)
    log.info("ingested congress %d: %d nodes, %d roll calls, groups %s", congress, x.shape[0], x.shape[1],
             dict(zip(GROUP_NAMES, groups.sizes.tolist())))
    return SenateDataset(x, groups, len(senate_rolls), congress, ("President",) + tuple(states))


def export_dataset(d: SenateDataset, out_dir: Path | str) -> list[Path]:
    """Write ``signals.csv`` (nodes x votes) and ``groups.csv``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return [write_matrix(out / "signals.csv", d.x), write_groups(out / "groups.csv", d.groups)]


def write_surrogate_voteview(
    out_dir: Path | str, seed: int = 0, congress: int = 113, n_rolls: int = 657
) -> tuple[Path, Path]:
    """Synthetic files in the Voteview layout, for tests and offline demos.

    Senators get one-dimensional ideal points by party; each roll call has a
    random cut point and direction. One state has a mid-term replacement and
    one senator is an independent, so both ingestion edge cases are hit.
    """
    rng = rng_for(seed, 7)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    members = [(congress, "President", 99911, "USA", 100)]
    ideal = {99911: -0.4}
    kinds = ["DD"] * 20 + ["RR"] * 15 + ["DR"] * 15
    kinds = [kinds[i] for i in rng.permutation(len(kinds))]
    icpsr = 40000
    for st, kind in zip(STATES, kinds):
        for party in kind:
            icpsr += 1
            code = 100 if party == "D" else 200
            members.append((congress, "Senate", icpsr, st, code))
            ideal[icpsr] = rng.normal(-0.5 if code == 100 else 0.5, 0.15)
    # an independent in the first mixed state, and a short-serving predecessor in the first DD state
    first_mixed = next(i for i, m in enumerate(members) if m[1] == "Senate" and kinds[STATES.index(m[3])] == "DR")
    m = members[first_mixed]
    members[first_mixed] = (m[0], m[1], m[2], m[3], 328)
    dd_state = STATES[kinds.index("DD")]
    icpsr += 1
    members.append((congress, "Senate", icpsr, dd_state, 100))
    ideal[icpsr] = -0.5
    replaced = next(m[2] for m in members if m[3] == dd_state and m[1] == "Senate")

    votes = []
    for roll in range(1, n_rolls + 1):
        cut = rng.normal(0.0, 0.4)
        sign = 1.0 if rng.random() < 0.5 else -1.0
        for _, chamber, k, st, _p in members:
            if chamber == "President":
                if rng.random() > 0.1:
                    continue
            elif k == replaced and roll > 40:
                continue
            elif k == icpsr and roll <= 40:
                continue
            if rng.random() < 0.03:
                cast = 9
            else:
                yea = sign * (ideal[k] - cut) + rng.normal(0.0, 0.25) > 0
                cast = int(rng.choice((1, 2, 3), p=(0.9, 0.05, 0.05))) if yea else int(rng.choice((4, 5, 6), p=(0.9, 0.05, 0.05)))
            votes.append((congress, "Senate" if chamber == "Senate" else "President", roll, k, cast))

    mpath, vpath = out / "members.csv", out / "votes.csv"
    with open(mpath, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MEMBER_COLUMNS + ("bioname",))
        for rec in members:
            w.writerow(rec + (f"MEMBER {rec[2]}",))
    with open(vpath, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(VOTE_COLUMNS + ("prob",))
        for rec in votes:
            w.writerow(rec + ("",))
    return vpath, mpath
