import io

import numpy as np
import pytest

from evrecon import (
    Event,
    EventParseError,
    SensorGeometry,
    StreamOrderError,
    events_from_text,
    format_event_line,
    frame_path,
    parse_event_line,
    read_pgm,
    read_stream,
    to_gray,
    write_events,
    write_pgm,
)

GEOM = SensorGeometry(width=16, height=16)


def test_parse_positive_polarity():
    ev = parse_event_line("1000 5 7 1")
    assert ev == Event(x=5, y=7, polarity=1, timestamp=1000)


def test_parse_zero_encodes_negative():
    ev = parse_event_line("1000 5 7 0")
    assert ev == Event(x=5, y=7, polarity=-1, timestamp=1000)


def test_parse_explicit_negative():
    assert parse_event_line("42 1 2 -1").polarity == -1


@pytest.mark.parametrize("line", ["1000 5", "1000 5 7 1 9", ""])
def test_parse_field_count_error(line):
    with pytest.raises(EventParseError, match="4 fields"):
        parse_event_line(line, line_no=3)


def test_parse_error_names_line():
    with pytest.raises(EventParseError, match="line 17"):
        parse_event_line("a b c d", line_no=17)


@pytest.mark.parametrize("line", ["x 1 2 1", "10 1.5 2 1", "10 1 2 2"])
def test_parse_bad_tokens(line):
    with pytest.raises(EventParseError):
        parse_event_line(line)


def test_parse_negative_fields_rejected():
    with pytest.raises(EventParseError, match="negative"):
        parse_event_line("-5 1 2 1")
    with pytest.raises(EventParseError, match="negative"):
        parse_event_line("5 -1 2 1")


def test_geometry_validation():
    with pytest.raises(ValueError):
        SensorGeometry(width=1, height=16)


def test_read_empty_stream():
    assert events_from_text("", GEOM) == []


def test_read_skips_comments_and_blank_lines():
    text = "# header\n\n10 1 1 1\r\n20 2 2 0\n"
    events = events_from_text(text, GEOM)
    assert [e.timestamp for e in events] == [10, 20]
    assert [e.polarity for e in events] == [1, -1]


def test_equal_timestamps_preserve_file_order():
    events = events_from_text("5 1 1 1\n5 2 2 0\n", GEOM)
    assert [(e.x, e.polarity) for e in events] == [(1, 1), (2, -1)]


def test_timestamp_regression_rejected_with_index():
    with pytest.raises(StreamOrderError) as exc:
        events_from_text("5 1 1 1\n3 2 2 1\n", GEOM)
    assert exc.value.index == 1


def test_timestamp_slack_allows_small_regression():
    events = list(read_stream(io.StringIO("5 1 1 1\n3 2 2 1\n"), GEOM, slack=2))
    assert len(events) == 2


def test_out_of_bounds_coordinate():
    with pytest.raises(EventParseError, match="outside"):
        events_from_text("5 99 1 1\n", GEOM)


def test_read_stream_is_lazy():
    stream = read_stream(io.StringIO("5 1 1 1\n"), GEOM)
    assert iter(stream) is stream  # generator, single pass


def test_round_trip(tmp_path):
    events = [
        Event(x=3, y=4, polarity=1, timestamp=100),
        Event(x=5, y=6, polarity=-1, timestamp=100),
        Event(x=0, y=0, polarity=1, timestamp=250),
    ]
    path = tmp_path / "events.txt"
    n = write_events(events, path, header="geometry 16 16")
    assert n == 3
    assert list(read_stream(path, GEOM)) == events


def test_format_event_line_polarity_convention():
    assert format_event_line(Event(x=1, y=2, polarity=-1, timestamp=9)) == "9 1 2 0"
    assert format_event_line(Event(x=1, y=2, polarity=1, timestamp=9)) == "9 1 2 1"


# --- PGM -----------------------------------------------------------------


def test_pgm_constant_extremes(tmp_path):
    lo = np.full((4, 6), 1.0)
    write_pgm(lo, (1.0, 2.0), tmp_path / "lo.pgm")
    assert read_pgm(tmp_path / "lo.pgm").max() == 0

    hi = np.full((4, 6), 2.0)
    write_pgm(hi, (1.0, 2.0), tmp_path / "hi.pgm")
    assert read_pgm(tmp_path / "hi.pgm").min() == 255


def test_pgm_midpoint_rounds_half_up():
    gray = to_gray(np.full((2, 2), 1.5), (1.0, 2.0))
    assert gray[0, 0] == 128  # 127.5 rounds up


def test_pgm_payload_size(tmp_path):
    img = np.linspace(1.0, 2.0, 5 * 7).reshape(5, 7)
    path = tmp_path / "img.pgm"
    write_pgm(img, (1.0, 2.0), path)
    data = path.read_bytes()
    assert data.startswith(b"P5\n7 5\n255\n")
    assert len(data) == len(b"P5\n7 5\n255\n") + 5 * 7


def test_pgm_round_trip_values(tmp_path):
    rng = np.random.default_rng(0)
    img = rng.uniform(1.0, 2.0, (8, 8))
    path = tmp_path / "r.pgm"
    write_pgm(img, (1.0, 2.0), path)
    back = read_pgm(path)
    np.testing.assert_array_equal(back, to_gray(img, (1.0, 2.0)))


def test_pgm_row_major_orientation(tmp_path):
    img = np.full((3, 4), 1.0)
    img[0, 3] = 2.0  # top-right corner
    path = tmp_path / "o.pgm"
    write_pgm(img, (1.0, 2.0), path)
    back = read_pgm(path)
    assert back[0, 3] == 255 and back[2, 0] == 0


def test_frame_path_naming(tmp_path):
    assert frame_path(tmp_path, "frame", 7).name == "frame_000007.pgm"
    assert frame_path(tmp_path, "gt", 123456).name == "gt_123456.pgm"
