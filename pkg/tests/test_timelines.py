import random

import pytest

from pgdnwatch.errors import DuplicateDomain, GapInCoverage, UnknownLabel
from pgdnwatch.timelines import load_single_day, load_timelines, parse_label
from pgdnwatch.types import Label


def write(tmp_path, name, rows):
    path = tmp_path / name
    path.write_text("fqdn,day,label\n" + "".join(f"{r}\n" for r in rows),
                    encoding="utf-8")
    return path


class TestParseLabel:
    def test_case_insensitive(self):
        assert parse_label("gambling") is Label.GAMBLING
        assert parse_label("Pornography") is Label.PORNOGRAPHY
        assert parse_label("OTHERS") is Label.OTHERS

    def test_unknown(self):
        with pytest.raises(UnknownLabel):
            parse_label("phishing")


class TestSingleDay:
    def test_happy_path(self, tmp_path):
        path = write(tmp_path, "labels.csv", [
            "a.com,3,others", "b.top,7,gambling", "c.xyz,1,Pornography",
        ])
        rows = load_single_day(path)
        assert rows == [
            ("a.com", 3, Label.OTHERS),
            ("b.top", 7, Label.GAMBLING),
            ("c.xyz", 1, Label.PORNOGRAPHY),
        ]

    def test_duplicate_domain_named_in_error(self, tmp_path):
        path = write(tmp_path, "dup.csv", ["a.com,1,others", "a.com,2,gambling"])
        with pytest.raises(DuplicateDomain, match="a.com"):
            load_single_day(path)

    def test_header_required(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a.com,1,others\n", encoding="utf-8")
        with pytest.raises(ValueError):
            load_single_day(path)


def timeline_rows(fqdn, labels_by_day):
    return [f"{fqdn},{d},{lab}" for d, lab in labels_by_day.items()]


class TestTimelines:
    def test_change_date_computed(self, tmp_path):
        days = {d: "others" for d in range(1, 10)}
        days.update({d: "gambling" for d in range(10, 21)})
        path = write(tmp_path, "tl.csv", timeline_rows("late.top", days))
        (tl,) = load_timelines(path)
        assert tl.date_of_change == 10
        assert tl.domain.fqdn == "late.top"

    def test_never_changed_loads_without_change_date(self, tmp_path, caplog):
        days = {d: "others" for d in range(1, 21)}
        path = write(tmp_path, "tl.csv", timeline_rows("calm.com", days))
        with caplog.at_level("WARNING"):
            (tl,) = load_timelines(path)
        assert tl.date_of_change is None
        assert "calm.com" in caplog.text

    def test_gap_rejected(self, tmp_path):
        days = {d: "others" for d in range(1, 21) if d != 7}
        path = write(tmp_path, "tl.csv", timeline_rows("gappy.com", days))
        with pytest.raises(GapInCoverage, match="7"):
            load_timelines(path)

    def test_unknown_label_rejected(self, tmp_path):
        days = {d: "others" for d in range(1, 21)}
        days[3] = "weird"
        path = write(tmp_path, "tl.csv", timeline_rows("x.com", days))
        with pytest.raises(UnknownLabel):
            load_timelines(path)

    def test_order_insensitive(self, tmp_path):
        days = {d: ("gambling" if d >= 12 else "others") for d in range(1, 21)}
        rows = timeline_rows("shuffle.net", days)
        random.Random(4).shuffle(rows)
        path_a = write(tmp_path, "a.csv", timeline_rows("shuffle.net", days))
        path_b = write(tmp_path, "b.csv", rows)
        assert load_timelines(path_a) == load_timelines(path_b)

    def test_multiple_domains(self, tmp_path):
        rows = []
        rows += timeline_rows("one.com", {d: "others" for d in range(1, 21)})
        rows += timeline_rows("two.com", {d: "pornography" for d in range(1, 21)})
        path = write(tmp_path, "multi.csv", rows)
        timelines = load_timelines(path)
        assert [tl.domain.fqdn for tl in timelines] == ["one.com", "two.com"]
        assert timelines[1].date_of_change == 1
