import json
import math

import numpy as np
import pytest

from nftnet.dataset import Dataset, DatasetHeader, synthesize_record
from nftnet.errors import InvalidArgument, NftError
from nftnet.evalharness import (
    CSV_HEADER,
    BinRow,
    EvalReport,
    assign_bins,
    back_to_back,
    breakdown_by,
    classical_inft,
    classical_nft,
    emit_report,
    energy_bin_edges,
    evaluate,
    identity_transform,
    low_power_agreement,
    probe_set,
    read_report,
    record_rmse,
    rmse_by_energy,
    run_probes,
)
from nftnet.modem import BurstConfig, CarrierKind
from nftnet.neuralnet import Direction, ModelSpec, complex_to_rows, init_state, training_pairs
from nftnet.scattering import forward_nft

SMALL = ModelSpec(widths=(4, 8, 16))


def label_transform(direction):
    def apply(x, records):
        return training_pairs(records, direction)[1]

    apply.direction = direction
    return apply


def zero_transform(x, records=None):
    return np.zeros_like(x)


zero_transform.direction = Direction.NFT


def low_energy_records(count, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        cfg = BurstConfig(4, 32, CarrierKind(rng.choice(list(CarrierKind))), rng.uniform(0.9e-9, 1.3e-9),
                          0.62, rng.uniform(0, np.pi))
        out.append(synthesize_record(cfg, rng.integers(0, 2, cfg.n_bits).astype(np.uint8)))
    return out


# ---------------------------------------------------------------- binning


def test_edges_are_log_spaced():
    e = energy_bin_edges([0.1, 1.0, 10.0], 4)
    assert e[0] == pytest.approx(0.1) and e[-1] == pytest.approx(10.0)
    assert np.allclose(np.diff(np.log(e)), math.log(100) / 4)


def test_top_edge_in_last_bin():
    edges = energy_bin_edges([1.0, 2.0, 4.0], 2)
    assert list(assign_bins([1.0, 2.0, 4.0], edges)) == [0, 1, 1]


def test_edges_reject_non_positive():
    with pytest.raises(InvalidArgument):
        energy_bin_edges([0.0, 1.0])
    assert energy_bin_edges([]).size == 0


def test_record_rmse():
    a = np.zeros((2, 2, 4))
    b = np.ones((2, 2, 4))
    b[1] *= 3
    assert list(record_rmse(a, b)) == [1.0, 3.0]


# ---------------------------------------------------------------- rmse tables


def test_perfect_model_has_zero_rmse(small_dataset):
    for d in Direction:
        rows = rmse_by_energy(label_transform(d), small_dataset)
        assert all(r["rmse"] == 0 for r in rows)
        assert sum(r["count"] for r in rows) == len(small_dataset)


def test_zero_model_rmse_is_label_rms(small_dataset):
    rows = rmse_by_energy(zero_transform, small_dataset)
    _, y = training_pairs(small_dataset.records, Direction.NFT)
    per = np.sqrt(np.mean(y.astype(np.float64) ** 2, axis=(1, 2)))
    assert 0 < min(r["rmse"] for r in rows) and max(r["rmse"] for r in rows) <= 1
    total = sum(r["rmse"] * r["count"] for r in rows) / len(small_dataset)
    assert total == pytest.approx(per.mean(), rel=1e-6)


def test_direction_required(small_dataset):
    with pytest.raises(InvalidArgument):
        rmse_by_energy(identity_transform, small_dataset)


# ---------------------------------------------------------------- back to back


def test_identity_b2b_is_error_free(small_dataset):
    res = back_to_back(identity_transform, identity_transform, small_dataset)
    assert res.ber == 0 and res.failures == 0
    assert res.total_bits.sum() == sum(r.bits.size for r in small_dataset.records)


def test_classical_b2b_low_energy_error_free():
    res = back_to_back(classical_inft, classical_nft, low_energy_records(6))
    assert res.ber == 0 and res.failures == 0


def test_classical_transforms_match_references(small_dataset):
    recs = small_dataset.records[:3]
    x, _ = training_pairs(recs, Direction.NFT)
    # the forward path uses BO, so compare against BO of the stored signal
    ref = np.stack([complex_to_rows(forward_nft(r.q, r.nonlinear.grid, "bo").q_spec.values / r.nonlinear_norm)
                    for r in recs])
    assert np.max(np.abs(classical_nft(x, recs) - ref)) < 1e-5
    x, y = training_pairs(recs, Direction.INFT)
    assert np.max(np.abs(classical_inft(x, recs) - y)) < 1e-5


def test_shape_mismatch_rejected(small_dataset):
    with pytest.raises(InvalidArgument):
        back_to_back(identity_transform, lambda x, r: x[:, :, :8], small_dataset)


# ---------------------------------------------------------------- breakdowns


def test_groups_partition_dataset(small_dataset):
    n = len(small_dataset)
    for key in ("subcarriers", "qam"):
        rows = breakdown_by(small_dataset, key)
        assert sum(r.count for r in rows) == n
        assert len({r.key for r in rows}) == len(rows)
    with pytest.raises(InvalidArgument):
        breakdown_by(small_dataset, "phase")


def test_report_tables_are_consistent(small_dataset):
    nft = init_state(ModelSpec(Direction.NFT, SMALL.widths), np.random.default_rng(0))
    inft = init_state(ModelSpec(Direction.INFT, SMALL.widths), np.random.default_rng(1))
    rep = evaluate(small_dataset, nft_model=nft, inft_model=inft, classical=True)
    assert rep.totals["total_bits"] == sum(r.bits.size for r in small_dataset.records)
    assert rep.totals["error_bits_classical"] == 0
    for table in (rep.by_subcarrier, rep.by_qam):
        assert sum(r.count for r in table) == len(small_dataset)
    bits = {}
    for r in small_dataset.records:
        bits[r.config.n_subcarriers] = bits.get(r.config.n_subcarriers, 0) + r.bits.size
    errs = sum(row.ber_nn * bits[row.key] for row in rep.by_subcarrier)
    assert errs == pytest.approx(rep.totals["error_bits_nn"])
    assert sum(b.count for b in rep.energy_bins) == len(small_dataset)
    # an untrained model is far from its labels
    assert all(b.rmse_nft > 1e-3 and b.rmse_inft > 1e-3 for b in rep.energy_bins)


def test_wrong_direction_rejected(small_dataset):
    inft = init_state(ModelSpec(Direction.INFT, SMALL.widths), np.random.default_rng(1))
    with pytest.raises(InvalidArgument):
        evaluate(small_dataset, nft_model=inft)


def test_empty_dataset_report(tmp_path):
    rep = evaluate(Dataset(DatasetHeader(0, 2048, 96e9, 0), []))
    assert rep.energy_bins == [] and rep.totals["total_bits"] == 0
    emit_report(rep, tmp_path / "r.csv", "csv")
    assert (tmp_path / "r.csv").read_text().strip() == ",".join(CSV_HEADER)


# ---------------------------------------------------------------- report files


def sample_report():
    return EvalReport(
        energy_bins=[BinRow(0.1, 0.01, 0.02, 0.0, None, 3), BinRow(1.3, 0.03, 0.1, 1e-3, 2e-3, 5)],
        totals={"error_bits_nn": 4, "error_bits_classical": None, "total_bits": 4000},
    )


def test_json_round_trip(small_dataset, tmp_path):
    rep = evaluate(small_dataset, classical=False)
    p = tmp_path / "r.json"
    emit_report(rep, p)
    assert read_report(p) == rep
    assert json.loads(p.read_text())["totals"]["total_bits"] == rep.totals["total_bits"]


def test_csv_round_trip(tmp_path):
    rep = sample_report()
    p = tmp_path / "r.csv"
    emit_report(rep, p, "csv")
    lines = p.read_text().splitlines()
    assert lines[0] == "bin_center_pj,rmse_nft,rmse_inft,ber_nn,ber_classical"
    assert lines[1].endswith(",")  # missing column is empty
    back = read_report(p)
    for a, b in zip(rep.energy_bins, back.energy_bins):
        assert (a.center_pj, a.rmse_nft, a.rmse_inft, a.ber_nn, a.ber_classical) == (
            b.center_pj, b.rmse_nft, b.rmse_inft, b.ber_nn, b.ber_classical)


def test_report_errors(tmp_path):
    with pytest.raises(InvalidArgument):
        emit_report(sample_report(), tmp_path / "r.txt", "xml")
    with pytest.raises(NftError):
        emit_report(sample_report(), tmp_path / "missing" / "r.json")
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n")
    with pytest.raises(NftError):
        read_report(bad)


def test_report_is_deterministic(small_dataset, tmp_path):
    paths = []
    for k in range(2):
        p = tmp_path / f"r{k}.json"
        emit_report(evaluate(small_dataset, classical=True), p)
        paths.append(p.read_bytes())
    assert paths[0] == paths[1]


# ---------------------------------------------------------------- low power and probes


def test_low_power_agreement():
    assert low_power_agreement(low_energy_records(5), fraction=1.0) < 0.05


@pytest.mark.parametrize("direction", list(Direction))
def test_probe_set(direction):
    probes = probe_set(direction)
    assert len(probes) == 2
    for p in probes:
        assert p.input.shape == p.label.shape == (2, 2048)
        assert np.all(np.isfinite(p.input)) and np.all(np.isfinite(p.label))
        for a in (p.input, p.label):
            assert np.max(np.hypot(a[0], a[1])) == pytest.approx(1.0)


def test_run_probes_dumps_files(tmp_path):
    state = init_state(ModelSpec(Direction.NFT, SMALL.widths), np.random.default_rng(2))
    res = run_probes(state, tmp_path)
    assert set(res) == {"sech_time", "sinc_time"}
    assert all(np.isfinite(v) and v > 0 for v in res.values())
    raw = (tmp_path / "sech_time_output.f32").read_bytes()
    assert len(raw) == 2 * 2048 * 4
