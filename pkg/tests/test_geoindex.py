"""Geohash encoding, covering-cell queries, and the encrypted index."""

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sbpp.geoindex import (
    CorpusError,
    Drop,
    GeoindexError,
    build_index,
    cell_dimensions_m,
    client_tokens,
    gen_clustered_corpus,
    gen_uniform_corpus,
    geohash_decode_bbox,
    geohash_encode,
    geohash_neighbors,
    haversine_m,
    load_corpus,
    make_token,
    precision_for_radius,
    save_corpus,
)

TOKYO = (35.6, 35.8, 139.6, 139.9)


def test_geohash_frozen_vectors():
    assert geohash_encode(35.7, 139.75, 5) == "xn77h"
    assert geohash_encode(35.7, 139.75, 6) == "xn77h4"
    assert geohash_encode(35.6895, 139.6917, 8) == "xn774c06"
    assert geohash_encode(0.0, 0.0, 5) == "s0000"
    assert geohash_encode(-33.8688, 151.2093, 7) == "r3gx2f7"


def test_geohash_classic_vectors():
    # the two canonical examples every implementation agrees on
    assert geohash_encode(42.605, -5.603, 5) == "ezs42"
    assert geohash_encode(57.64911, 10.40744, 11) == "u4pruydqqvj"


def test_bbox_frozen_vector():
    assert geohash_decode_bbox("xn76u") == (
        35.6396484375,
        35.68359375,
        139.74609375,
        139.7900390625,
    )


def test_bbox_contains_encoded_point():
    lat, lon = 35.7, 139.75
    cell = geohash_encode(lat, lon, 6)
    lat_lo, lat_hi, lon_lo, lon_hi = geohash_decode_bbox(cell)
    assert lat_lo <= lat < lat_hi
    assert lon_lo <= lon < lon_hi


def test_geohash_rejects_bad_inputs():
    with pytest.raises(GeoindexError):
        geohash_encode(91.0, 0.0, 5)
    with pytest.raises(GeoindexError):
        geohash_encode(0.0, 181.0, 5)
    with pytest.raises(GeoindexError):
        geohash_encode(0.0, 0.0, 0)
    with pytest.raises(GeoindexError):
        geohash_decode_bbox("xn7a")  # 'a' is not in the base32 alphabet


def test_neighbors_tile_the_3x3_block():
    cell = "xn76u"
    neigh = geohash_neighbors(cell)
    assert len(neigh) == 8
    assert len(set(neigh)) == 8
    assert cell not in neigh
    lat_lo, lat_hi, lon_lo, lon_hi = geohash_decode_bbox(cell)
    dlat, dlon = lat_hi - lat_lo, lon_hi - lon_lo
    lat_c, lon_c = (lat_lo + lat_hi) / 2, (lon_lo + lon_hi) / 2
    expected = {
        geohash_encode(lat_c + dy * dlat, lon_c + dx * dlon, len(cell))
        for dy in (-1, 0, 1)
        for dx in (-1, 0, 1)
        if (dy, dx) != (0, 0)
    }
    assert set(neigh) == expected


def test_neighbors_thin_out_at_the_pole():
    polar = geohash_encode(89.99, 0.0, 3)
    assert len(geohash_neighbors(polar)) < 8


def test_precision_for_radius_table():
    # largest precision whose min cell dimension still covers the radius
    cases = {0.5: 9, 3: 9, 10: 8, 100: 7, 500: 6, 1000: 5, 5000: 4, 50000: 3, 1e7: 1}
    for radius, want in cases.items():
        assert precision_for_radius(radius) == want, radius


def test_precision_for_radius_monotone():
    last = 10
    for radius in (1, 10, 100, 1000, 10000, 100000, 1e6):
        p = precision_for_radius(radius)
        assert p <= last
        last = p
    with pytest.raises(GeoindexError):
        precision_for_radius(0)


def test_cell_dimensions_shrink_with_precision():
    for p in range(1, 9):
        assert min(cell_dimensions_m(p, 35.7)) > min(cell_dimensions_m(p + 1, 35.7))


def test_haversine_known_distance():
    # 0.01 degrees of latitude on the reference sphere
    assert haversine_m(0.0, 0.0, 0.01, 0.0) == pytest.approx(1111.9492664455875, abs=1e-6)
    assert haversine_m(35.7, 139.75, 35.7, 139.75) == 0.0


def test_make_token_frozen_vector():
    tag = make_token(bytes(32), 5, "xn76u")
    assert tag.hex() == "174f3fb62f6a4c202c6a33228d4e480573c4cfe16449b96b9737080933c87828"
    with pytest.raises(GeoindexError):
        make_token(b"short", 5, "xn76u")


def test_client_tokens_emit_nine_cells():
    precision, tags = client_tokens(bytes(32), 35.7, 139.75, 1000.0)
    assert precision == 5
    assert len(tags) == 9
    assert len(set(tags)) == 9
    assert all(len(t) == 32 for t in tags)


def test_client_tokens_deterministic():
    a = client_tokens(bytes(32), 35.7, 139.75, 1000.0)
    b = client_tokens(bytes(32), 35.7, 139.75, 1000.0)
    assert a == b


def test_index_match_is_sorted_union():
    key = b"\x01" * 32
    drops = [
        Drop("b", 35.70, 139.75),
        Drop("a", 35.70, 139.75),
        Drop("c", 35.75, 139.60),  # different cell
    ]
    index = build_index(key, drops, [5])
    _, tags = client_tokens(key, 35.70, 139.75, 1000.0)
    assert index.match(tags) == ["a", "b"]
    assert index.match([b"\x00" * 32]) == []


def test_covering_recall_within_radius():
    # any drop within the query radius lands in the 3x3 token neighborhood
    key = b"\x02" * 32
    drops = gen_uniform_corpus(400, seed=11, bbox=TOKYO)
    index = build_index(key, drops, [5])
    qlat, qlon, radius = 35.7, 139.75, 1000.0
    _, tags = client_tokens(key, qlat, qlon, radius)
    got = set(index.match(tags))
    truth = {d.id for d in drops if haversine_m(qlat, qlon, d.lat, d.lon) <= radius}
    assert truth <= got


@given(
    st.floats(min_value=35.61, max_value=35.79),
    st.floats(min_value=139.61, max_value=139.89),
    st.floats(min_value=0.0, max_value=0.008),
    st.floats(min_value=0.0, max_value=2 * math.pi),
)
@settings(max_examples=150, deadline=None)
def test_covering_property(lat, lon, offset_deg, angle):
    # drop placed within ~889 m of the query is always inside the cover
    key = b"\x03" * 32
    dlat = offset_deg * math.cos(angle)
    dlon = offset_deg * math.sin(angle) / math.cos(math.radians(lat))
    drop = Drop("d0", lat + dlat, lon + dlon)
    if haversine_m(lat, lon, drop.lat, drop.lon) > 1000.0:
        return
    index = build_index(key, [drop], [5])
    _, tags = client_tokens(key, lat, lon, 1000.0)
    assert index.match(tags) == ["d0"]


def test_corpus_round_trip(tmp_path):
    # coordinates are stored at 7 decimals (about 1 cm), ids exactly
    drops = gen_uniform_corpus(50, seed=3, bbox=TOKYO)
    path = tmp_path / "corpus.tsv"
    save_corpus(str(path), drops)
    back = load_corpus(str(path))
    assert [d.id for d in back] == [d.id for d in drops]
    for got, want in zip(back, drops):
        assert got.lat == pytest.approx(want.lat, abs=5e-8)
        assert got.lon == pytest.approx(want.lon, abs=5e-8)
    save_corpus(str(path), back)
    assert load_corpus(str(path)) == back


def test_corpus_skips_comments_and_blanks(tmp_path):
    path = tmp_path / "c.tsv"
    path.write_text("# header\nd1\t35.7\t139.75\n\nd2\t35.71\t139.76\n")
    assert [d.id for d in load_corpus(str(path))] == ["d1", "d2"]


def test_corpus_rejects_malformed_rows(tmp_path):
    path = tmp_path / "bad.tsv"
    path.write_text("d1\t35.7\n")
    with pytest.raises(CorpusError):
        load_corpus(str(path))
    path.write_text("d1\tnorth\t139.75\n")
    with pytest.raises(CorpusError):
        load_corpus(str(path))


def test_gen_uniform_corpus_deterministic_and_bounded():
    a = gen_uniform_corpus(100, seed=5, bbox=TOKYO)
    b = gen_uniform_corpus(100, seed=5, bbox=TOKYO)
    assert a == b
    assert gen_uniform_corpus(100, seed=6, bbox=TOKYO) != a
    assert len({d.id for d in a}) == 100
    lat_lo, lat_hi, lon_lo, lon_hi = TOKYO
    for d in a:
        assert lat_lo <= d.lat <= lat_hi
        assert lon_lo <= d.lon <= lon_hi


def test_gen_clustered_corpus_in_bbox():
    drops = gen_clustered_corpus(200, seed=5, bbox=TOKYO)
    assert len(drops) == 200
    lat_lo, lat_hi, lon_lo, lon_hi = TOKYO
    for d in drops:
        assert lat_lo <= d.lat <= lat_hi
        assert lon_lo <= d.lon <= lon_hi
