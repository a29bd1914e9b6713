import datetime as dt

import pytest

from seasonal_ads.corpus import (
    AdRecord,
    EventCalendar,
    FixedDate,
    LookupTable,
    SeasonalEvent,
    non_seasonal_event,
)

TS = dt.datetime(2023, 5, 1, 12, 0, tzinfo=dt.timezone.utc)


def make_ad(ad_id, title="", body="", image_ref=None, locale="en-US", created_at=TS):
    return AdRecord(ad_id, title, body, image_ref, locale, created_at)


def _lookup(dates):
    return LookupTable({y: dt.date.fromisoformat(d) for y, d in dates.items()})


@pytest.fixture(scope="session")
def calendar7():
    """The 7-event benchmark calendar (6 seasonal events plus none)."""
    events = [
        SeasonalEvent(
            "easter", "Easter",
            _lookup({2023: "2023-04-09", 2024: "2024-03-31", 2025: "2025-04-20"}),
            7, ("easter",), "Celebration of Easter with egg hunts and spring themes.",
        ),
        SeasonalEvent(
            "fathers_day", "Father's Day",
            _lookup({2023: "2023-06-18", 2024: "2024-06-16", 2025: "2025-06-15"}),
            7, ("father's day", "fathers day"), "Honoring fathers with gifts and cards.",
        ),
        SeasonalEvent(
            "july_4th", "July 4th", FixedDate(7, 4),
            3, ("july 4th", "4th of july", "independence day"),
            "US Independence Day with fireworks and barbecues.",
        ),
        SeasonalEvent(
            "memorial_day", "Memorial Day",
            _lookup({2023: "2023-05-29", 2024: "2024-05-27", 2025: "2025-05-26"}),
            3, ("memorial day",), "US Memorial Day long-weekend sales.",
        ),
        SeasonalEvent(
            "mothers_day", "Mother's Day",
            _lookup({2023: "2023-05-14", 2024: "2024-05-12", 2025: "2025-05-11"}),
            7, ("mother's day", "mothers day"), "Honoring mothers with flowers and gifts.",
        ),
        SeasonalEvent(
            "valentines_day", "Valentine's Day", FixedDate(2, 14),
            7, ("valentine", "valentines"), "Valentine's Day romance: chocolate, roses, cards.",
        ),
        non_seasonal_event(),
    ]
    return EventCalendar(events)


@pytest.fixture
def valentine(calendar7):
    return calendar7["valentines_day"]
