import math

import pytest

from conftest import build_fixture_apk, build_zip, build_dex, build_axml
from droidsift import (Label, MarginalSpec, default_catalog, extract_corpus,
                       load_corpus_manifest, load_store, save_store,
                       synth_generate)
from droidsift.corpus import default_marginals
from droidsift.detect import FeatureCatalog
from droidsift.errors import (BadSpec, BadStore, CatalogMismatch,
                              NoReadableSamples)


def test_manifest_csv_parse():
    data = b"id,label,family\napps/a.apk,benign,\napps/m.apk,suspicious,DroidDream\n"
    manifest = load_corpus_manifest(data)
    assert len(manifest.records) == 2
    assert manifest.records[0].label is Label.BENIGN
    assert manifest.records[0].family is None
    assert manifest.records[1].family == "DroidDream"


def test_manifest_rejects_bad_label():
    with pytest.raises(BadStore):
        load_corpus_manifest(b"id,label,family\nx.apk,weird,\n")


def test_manifest_rejects_duplicate_id():
    with pytest.raises(BadStore):
        load_corpus_manifest(b"id,label,family\nx.apk,benign,\nx.apk,benign,\n")


def test_default_marginals_cover_catalog(catalog):
    spec = default_marginals()
    assert set(spec.marginals) == set(catalog.ids())
    for p_ben, p_sus in spec.marginals.values():
        assert 0.0 <= p_ben <= 1.0 and 0.0 <= p_sus <= 1.0


def test_synth_is_deterministic(catalog):
    a = synth_generate(default_marginals(), 30, 30, seed=5, catalog=catalog)
    b = synth_generate(default_marginals(), 30, 30, seed=5, catalog=catalog)
    assert save_store(a) == save_store(b)
    c = synth_generate(default_marginals(), 30, 30, seed=6, catalog=catalog)
    assert save_store(a) != save_store(c)


def test_synth_certain_marginal_sets_bit_everywhere(catalog):
    marginals = {fid: (0.0, 0.0) for fid in catalog.ids()}
    marginals["chmod"] = (1.0, 1.0)
    store = synth_generate(MarginalSpec(marginals=marginals), 20, 20, seed=1,
                           catalog=catalog)
    idx = catalog.index_of("chmod")
    assert all(p.bits[idx] for p in store.profiles)
    other = catalog.index_of("mount")
    assert not any(p.bits[other] for p in store.profiles)


def test_synth_frequencies_track_marginals(catalog):
    store = synth_generate(default_marginals(), 1000, 1000, seed=20601,
                           catalog=catalog)
    spec = default_marginals()
    for i, fid in enumerate(catalog.ids()):
        p_ben, p_sus = spec.marginals[fid]
        ben_hits = sum(p.bits[i] for p in store.profiles if p.label is Label.BENIGN)
        sus_hits = sum(p.bits[i] for p in store.profiles if p.label is Label.SUSPICIOUS)
        # 99.9% binomial interval (normal approximation, z = 3.29)
        for hits, p in ((ben_hits, p_ben), (sus_hits, p_sus)):
            sigma = math.sqrt(1000 * p * (1 - p))
            assert abs(hits - 1000 * p) <= 3.29 * sigma + 1.0


def test_synth_generator_law_over_many_seeds(catalog):
    # weak-law check: sample means across seeds converge on the marginals
    spec = default_marginals()
    totals = [0] * len(catalog)
    seeds = range(40)
    per_seed = 50
    for seed in seeds:
        store = synth_generate(spec, 0, per_seed, seed=seed, catalog=catalog)
        for profile in store.profiles:
            for i, bit in enumerate(profile.bits):
                totals[i] += bit
    n = len(seeds) * per_seed
    for i, fid in enumerate(catalog.ids()):
        p = spec.marginals[fid][1]
        sigma = math.sqrt(max(p * (1 - p), 1e-9) / n)
        assert abs(totals[i] / n - p) < 5 * sigma + 0.01


def test_synth_rejects_incomplete_marginals(catalog):
    with pytest.raises(BadSpec):
        synth_generate(MarginalSpec(marginals={"chmod": (0.1, 0.2)}), 5, 5,
                       seed=0, catalog=catalog)


def test_synth_rejects_out_of_range_probability(catalog):
    marginals = {fid: (0.0, 0.0) for fid in catalog.ids()}
    marginals["chmod"] = (1.5, 0.0)
    with pytest.raises(BadSpec):
        synth_generate(MarginalSpec(marginals=marginals), 5, 5, seed=0,
                       catalog=catalog)


def test_store_round_trip_including_diagnostics(catalog):
    store = synth_generate(default_marginals(), 5, 5, seed=3, catalog=catalog)
    noisy = store.profiles[0]
    store.profiles[0] = type(noisy)(
        source_id=noisy.source_id, label=noisy.label, family="fam,with,commas",
        bits=noisy.bits, diagnostics=("first note", "second, with comma"))
    store.diagnostics.append("corpus-level diagnostic")
    reloaded = load_store(save_store(store), catalog)
    assert reloaded.catalog_version == store.catalog_version
    assert reloaded.diagnostics == store.diagnostics
    assert reloaded.profiles == store.profiles


def test_truncated_store_rejected(catalog):
    blob = save_store(synth_generate(default_marginals(), 3, 3, seed=3,
                                     catalog=catalog))
    with pytest.raises(BadStore):
        load_store(blob[:10], catalog)


def test_store_bits_width_must_match_catalog(catalog):
    blob = save_store(synth_generate(default_marginals(), 2, 2, seed=3,
                                     catalog=catalog)).decode()
    damaged = blob.replace("\n", "\n", 1)
    lines = damaged.splitlines()
    record = lines[2].split(",")
    record[3] = record[3][:-3]  # shave three bits off
    lines[2] = ",".join(record)
    with pytest.raises(BadStore):
        load_store("\n".join(lines).encode(), catalog)


def test_catalog_mismatch_on_load(catalog):
    store = synth_generate(default_marginals(), 2, 2, seed=3, catalog=catalog)
    other = FeatureCatalog(features=catalog.features, version="v2-different")
    with pytest.raises(CatalogMismatch):
        load_store(save_store(store), other)


def test_extract_corpus_fixture_apps(tmp_path, catalog):
    (tmp_path / "benign.apk").write_bytes(
        build_zip([("classes.dex", build_dex()),
                   ("AndroidManifest.xml", build_axml())]))
    (tmp_path / "mal.apk").write_bytes(build_fixture_apk())
    manifest = load_corpus_manifest(
        b"id,label,family\nbenign.apk,benign,\nmal.apk,suspicious,SynthFam\n")
    store = extract_corpus(manifest, catalog, base_dir=tmp_path)
    assert len(store.profiles) == 2
    assert store.profiles[0].label is Label.BENIGN
    assert not any(store.profiles[0].bits)
    assert sum(store.profiles[1].bits) == 4
    assert store.profiles[1].family == "SynthFam"


def test_extract_corpus_skips_unreadable_with_diagnostic(tmp_path, catalog):
    (tmp_path / "ok.apk").write_bytes(build_fixture_apk())
    manifest = load_corpus_manifest(
        b"id,label,family\nok.apk,benign,\nmissing.apk,benign,\n")
    store = extract_corpus(manifest, catalog, base_dir=tmp_path)
    assert len(store.profiles) == 1
    assert len(store.diagnostics) == 1
    assert "missing.apk" in store.diagnostics[0]


def test_extract_corpus_no_readable_samples(tmp_path, catalog):
    manifest = load_corpus_manifest(b"id,label,family\nghost.apk,benign,\n")
    with pytest.raises(NoReadableSamples):
        extract_corpus(manifest, catalog, base_dir=tmp_path)


def test_extract_corpus_rerun_is_byte_identical(tmp_path, catalog):
    (tmp_path / "app.apk").write_bytes(build_fixture_apk())
    manifest = load_corpus_manifest(b"id,label,family\napp.apk,suspicious,\n")
    first = save_store(extract_corpus(manifest, catalog, base_dir=tmp_path))
    second = save_store(extract_corpus(manifest, catalog, base_dir=tmp_path))
    assert first == second
