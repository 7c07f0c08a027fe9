import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from superhighway.construct import ConstructionParams, construct_superhighway
from superhighway.data import SynthConfig, generate_synthetic, ingest, load_domain, read_interactions, write_tsv
from superhighway.errors import EmptyDomain, EmptySharedItems, IngestError, InvalidParam
from superhighway.evaluate import average_precision_at_k, split
from superhighway.graph import CrossDomainSystem, Domain, DomainGraph, stats

from .oracles import topk_by_cosine

SMALL = dict(users_s=40, users_t=20, items_s=30, items_t=25, interactions_per_user=6, latent_dims=3)


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def test_three_line_files(tmp_path):
    src = write(tmp_path / "s.tsv", "a\tx\nb\tx\nb\ty\n")
    tgt = write(tmp_path / "t.tsv", "# comment\nc\tx\n\nc\tz\nd\tz\n")
    sys = ingest(src, tgt)
    assert (sys.source.num_edges, sys.target.num_edges) == (3, 3)
    assert (len(sys.source.users), len(sys.source.items)) == (2, 2)
    assert (len(sys.target.users), len(sys.target.items)) == (2, 2)
    assert len(sys.shared_items) == 1


def test_duplicate_pair_collapses_with_warning(tmp_path, caplog):
    path = write(tmp_path / "t.tsv", "u\ti\nu\ti\nu\tj\n")
    with caplog.at_level(logging.WARNING):
        g = load_domain(path, Domain.TARGET)
    assert g.num_edges == 2
    assert "duplicate" in caplog.text


@pytest.mark.parametrize("line, reason", [
    ("u", "fields"), ("u\ti\t1\t2", "fields"), ("\ti", "empty"), ("u\ti\tabc", "not a number"),
    ("u\ti\t-1", "positive"), ("u\ti\tnan", "positive"), ("u\ti\t0", "positive"),
])
def test_malformed_lines_report_line_numbers(tmp_path, line, reason):
    path = write(tmp_path / "t.tsv", f"u\ta\n# note\n{line}\nv\tb\n")
    with pytest.raises(IngestError) as info:
        read_interactions(path)
    assert info.value.line == 3
    assert reason in info.value.reason
    assert f"{path}:3" in str(info.value)


def test_skip_bad_lines(tmp_path, caplog):
    path = write(tmp_path / "t.tsv", "u\ta\nbroken\nv\tb\t2.5\n")
    with caplog.at_level(logging.WARNING):
        rows = read_interactions(path, skip_bad_lines=True)
    assert rows == [("u", "a", 1.0), ("v", "b", 1.0)]
    assert "skipped 1" in caplog.text


def test_binarize_versus_weighted(tmp_path):
    path = write(tmp_path / "t.tsv", "u\ta\t4.5\nu\tb\n")
    assert [w for _, _, w in read_interactions(path)] == [1.0, 1.0]
    assert [w for _, _, w in read_interactions(path, binarize=False)] == [4.5, 1.0]


def test_empty_domain(tmp_path):
    full = write(tmp_path / "s.tsv", "u\ta\n")
    empty = write(tmp_path / "t.tsv", "# nothing here\n\n")
    with pytest.raises(EmptyDomain):
        ingest(full, empty)
    with pytest.raises(EmptyDomain):
        ingest(empty, full)


def test_rating_export_sample_recount(tmp_path):
    # a rating-style export (user, item, rating) sampled at 1%
    rng = np.random.default_rng(3)
    users = rng.integers(0, 7000, size=100_000)
    items = rng.integers(0, 1000, size=100_000)
    ratings = rng.integers(1, 11, size=100_000) / 2
    keep = rng.random(100_000) < 0.01
    lines = [f"{u}\t{i}\t{r}" for u, i, r in zip(users[keep], items[keep], ratings[keep])]
    path = write(tmp_path / "ratings.tsv", "\n".join(lines) + "\n")
    g = load_domain(path, Domain.TARGET, binarize=False)
    pairs = {}
    for ln in path.read_text().splitlines():
        u, i, r = ln.split("\t")
        pairs[(u, i)] = max(float(r), pairs.get((u, i), 0.0))
    r = stats(g)
    assert r.users == len({u for u, _ in pairs})
    assert r.items == len({i for _, i in pairs})
    assert r.edges == len(pairs)
    assert g.weights.sum() / 2 == pytest.approx(sum(pairs.values()))


def test_tsv_export_round_trip(tmp_path):
    sys, _ = generate_synthetic(SynthConfig(**SMALL, seed=4))
    for g in (sys.source, sys.target):
        path = tmp_path / "d.tsv"
        write_tsv(g, path)
        back = load_domain(path, g.domain, binarize=False)
        assert back.edge_dict() == g.edge_dict()


# -- synthetic generator ---------------------------------------------------------


def test_synth_config_validation():
    for bad in ({"users_s": 0}, {"overlap_ratio": 1.5}, {"noise": -0.1}, {"noise": float("inf")},
                {"interactions_per_user": 31}, {"target_interactions_per_user": 0},
                {"items_s": 5, "items_t": 25, "overlap_ratio": 1.0, "interactions_per_user": 3}):
        with pytest.raises(InvalidParam):
            generate_synthetic(SynthConfig(**{**SMALL, **bad}))


@settings(max_examples=25)
@given(st.integers(0, 10_000), st.sampled_from([0.0, 0.3, 1.0]), st.sampled_from([0.0, 0.1, 0.4]))
def test_generated_systems_are_valid(seed, noise, overlap):
    cfg = SynthConfig(**SMALL, noise=noise, overlap_ratio=overlap, seed=seed)
    sys, truth = generate_synthetic(cfg)
    # rebuilding through the validating constructors must succeed
    again = CrossDomainSystem(
        DomainGraph(Domain.SOURCE, sys.source.nodes, sys.source.matrix()),
        DomainGraph(Domain.TARGET, sys.target.nodes, sys.target.matrix()),
    )
    assert again.shared_items == sys.shared_items
    assert len(sys.source.users) == cfg.users_s and len(sys.target.users) == cfg.users_t
    assert len(sys.source.items) == cfg.items_s and len(sys.target.items) == cfg.items_t
    assert len(sys.shared_items) == cfg.shared
    assert all(sys.source.degree(u) >= 1 for u in sys.source.users)
    assert set(truth.user_latents) == set(sys.source.users) | set(sys.target.users)


def test_regeneration_is_byte_identical(tmp_path):
    cfg = SynthConfig(**SMALL, noise=0.3, seed=12)
    paths = []
    for run in range(2):
        sys, _ = generate_synthetic(cfg)
        p = tmp_path / f"t{run}.tsv"
        write_tsv(sys.target, p)
        paths.append(p.read_bytes())
    assert paths[0] == paths[1]
    assert generate_synthetic(cfg)[0] == generate_synthetic(cfg)[0]


def test_target_density_follows_its_own_mean():
    cfg = SynthConfig(users_s=400, users_t=400, items_s=300, items_t=300, interactions_per_user=40,
                      target_interactions_per_user=10, seed=1)
    sys, _ = generate_synthetic(cfg)
    assert sys.source.num_edges / 400 == pytest.approx(40, rel=0.15)
    assert sys.target.num_edges / 400 == pytest.approx(10, rel=0.15)


def test_overlap_extremes():
    sys, _ = generate_synthetic(SynthConfig(**{**SMALL, "overlap_ratio": 0.0}))
    assert sys.shared_items == frozenset()
    with pytest.raises(EmptySharedItems):
        construct_superhighway(sys, ConstructionParams(0.5, 1.0))
    sys, _ = generate_synthetic(SynthConfig(**{**SMALL, "items_s": 25, "overlap_ratio": 1.0}))
    assert sys.shared_items == sys.target.items == sys.source.items


def test_noise_free_users_take_their_exact_top_k():
    cfg = SynthConfig(users_s=50, users_t=50, items_s=40, items_t=40, latent_dims=2, noise=0.0,
                      interactions_per_user=5, seed=6)
    sys, truth = generate_synthetic(cfg)
    for g in (sys.source, sys.target):
        items = sorted(g.items)
        ivecs = np.stack([truth.item_latents[i] for i in items])
        for u in sorted(g.users):
            mine = {i for i, _ in g.neighbors(u)}
            (oracle,) = topk_by_cosine(truth.user_latents[u][None], ivecs, len(mine))
            assert mine == {items[j] for j in oracle}


def oracle_map(seed: int, noise: float, k: int = 10) -> float:
    """MAP@k when each user's pool is ranked by the ground-truth latent cosine."""
    cfg = SynthConfig(users_s=50, users_t=200, items_s=150, items_t=300, interactions_per_user=10,
                      latent_dims=8, noise=noise, seed=seed)
    sys, truth = generate_synthetic(cfg)
    _, s = split(sys, 0.2, seed)
    items = list(s.items)
    ivecs = np.stack([truth.item_latents[i] for i in items])
    ivecs /= np.linalg.norm(ivecs, axis=1, keepdims=True)
    aps = []
    for u in s.users:
        train = set(s.train_items[u])
        scores = ivecs @ truth.user_latents[u]
        ranked = [items[j] for j in np.argsort(-scores, kind="stable") if items[j] not in train]
        aps.append(average_precision_at_k(ranked, s.heldout[u], k))
    return float(np.mean(aps))


def test_oracle_map_decreases_with_noise():
    for seed in range(5):
        curve = [oracle_map(seed, noise) for noise in (0.0, 0.2, 1.0)]
        assert curve[0] > curve[1] > curve[2]
