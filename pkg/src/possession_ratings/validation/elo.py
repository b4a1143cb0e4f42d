"""Club ELO snapshots."""
from __future__ import annotations

import bisect
import csv
from collections import defaultdict

from ..errors import DataFormatError, IntegrityError

ELO_SCALE = 400.0


class EloTable:
    """Per-club ELO history; lookups use the latest snapshot dated strictly before a day."""

    def __init__(self, rows):
        hist = defaultdict(list)
        for club, date, elo in rows:
            hist[club].append((date, float(elo)))
        self._dates = {}
        self._values = {}
        for club, items in hist.items():
            items.sort()
            self._dates[club] = [d for d, _ in items]
            self._values[club] = [v for _, v in items]

    @property
    def clubs(self):
        return sorted(self._dates)

    def rating(self, club: str, date: str) -> float:
        if club not in self._dates:
            raise IntegrityError(f"no ELO history for club {club!r}")
        i = bisect.bisect_left(self._dates[club], date)
        if i == 0:
            raise IntegrityError(f"no ELO snapshot for {club!r} before {date}")
        return self._values[club][i - 1]

    def delta(self, home: str, away: str, date: str, scale: float = ELO_SCALE) -> float:
        return (self.rating(home, date) - self.rating(away, date)) / scale


def parse_elo(stream: bytes) -> EloTable:
    """``club,date,elo`` rows (ISO dates). The club-ELO export's ``Club,Elo,From``
    columns are accepted as well."""
    lines = [ln for ln in stream.decode("utf-8").splitlines() if ln.strip() and not ln.startswith("#")]
    reader = csv.DictReader(lines)
    fields = {f.strip().lower(): f for f in (reader.fieldnames or [])}
    if {"club", "date", "elo"} <= fields.keys():
        keys = fields["club"], fields["date"], fields["elo"]
    elif {"club", "from", "elo"} <= fields.keys():
        keys = fields["club"], fields["from"], fields["elo"]
    else:
        raise DataFormatError("expected columns club,date,elo", 0)
    rows = []
    for i, r in enumerate(reader, start=1):
        try:
            rows.append((r[keys[0]].strip(), r[keys[1]].strip()[:10], float(r[keys[2]])))
        except (TypeError, ValueError):
            raise DataFormatError("bad ELO row", i) from None
    return EloTable(rows)


def write_elo_csv(rows) -> str:
    return "club,date,elo\n" + "".join(f"{c},{d},{e!r}\n" for c, d, e in rows)
