"""RMSE and back-to-back BER evaluation of learned and classical transforms."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .core import (
    SpectrumKind,
    SpectrumSamples,
    TimeSignal,
    linear_surrogate_spectrum,
    make_nonlinear_grid,
    signal_from_linear_surrogate,
)
from .dataset import burst_time_grid
from .errors import InvalidArgument, NftError, NumericalFault
from .modem import nfdm_demodulate
from .neuralnet.model import Direction, ModelState, model_forward
from .neuralnet.training import complex_to_rows, rows_to_complex, training_pairs
from .scattering import forward_nft
from .synthesis import inverse_nft

__all__ = [
    "CSV_HEADER",
    "N_BINS",
    "BinRow",
    "GroupRow",
    "EvalReport",
    "B2BResult",
    "model_transform",
    "classical_inft",
    "classical_nft",
    "identity_transform",
    "energy_bin_edges",
    "assign_bins",
    "record_rmse",
    "rmse_by_energy",
    "back_to_back",
    "breakdown_by",
    "evaluate",
    "low_power_agreement",
    "emit_report",
    "read_report",
    "Probe",
    "probe_set",
    "run_probes",
]

CSV_HEADER = ["bin_center_pj", "rmse_nft", "rmse_inft", "ber_nn", "ber_classical"]
N_BINS = 10
EVAL_BATCH = 32


# ---------------------------------------------------------------- transforms
#
# A transform maps a stack of normalised spectra, float32 (N, 2, n), to a stack
# of the same shape. It also receives the matching records so that classical
# transforms can undo and redo the max-modulus normalisation.


def identity_transform(x, records=None):
    return np.asarray(x)


def model_transform(state: ModelState, batch: int = EVAL_BATCH):
    """Wrap a trained model as a transform (batched, float32)."""

    def apply(x, records=None):
        x = np.asarray(x, dtype=np.float32)
        out = np.empty_like(x)
        for s in range(0, len(x), batch):
            out[s:s + batch] = model_forward(state.spec, state, x[s:s + batch])
        return out

    apply.direction = state.spec.direction
    return apply


def _grid_of(record):
    return record.q.grid


def classical_inft(x, records):
    """Normalised nonlinear -> normalised linear via inverse_nft (best effort)."""
    out = np.empty_like(np.asarray(x, dtype=np.float32))
    for i, (row, rec) in enumerate(zip(x, records)):
        tg = _grid_of(rec)
        ng = make_nonlinear_grid(tg)
        Q = SpectrumSamples(ng, rows_to_complex(row) * rec.nonlinear_norm, SpectrumKind.NonlinearQ)
        q = inverse_nft(Q, tg, strict=False)
        L = linear_surrogate_spectrum(q).values
        out[i] = complex_to_rows(L / rec.linear_norm)
    return out


def classical_nft(x, records):
    """Normalised linear -> normalised nonlinear via forward_nft (BO)."""
    out = np.empty_like(np.asarray(x, dtype=np.float32))
    for i, (row, rec) in enumerate(zip(x, records)):
        tg = _grid_of(rec)
        ng = make_nonlinear_grid(tg)
        L = SpectrumSamples(ng, rows_to_complex(row) * rec.linear_norm, SpectrumKind.LinearSurrogate)
        q = signal_from_linear_surrogate(L, tg)
        Q = forward_nft(q, ng, "bo").q_spec.values
        out[i] = complex_to_rows(Q / rec.nonlinear_norm)
    return out


# ---------------------------------------------------------------- binning


def _records(dataset):
    return list(getattr(dataset, "records", dataset))


def energy_bin_edges(energies, n_bins: int = N_BINS) -> np.ndarray:
    """Log-spaced edges from the smallest to the largest energy."""
    e = np.asarray(energies, dtype=np.float64)
    if e.size == 0:
        return np.array([])
    lo, hi = float(e.min()), float(e.max())
    if not lo > 0:
        raise InvalidArgument("energies must be positive for log binning")
    if hi == lo:
        hi = lo * (1 + 1e-12)
    return np.geomspace(lo, hi, n_bins + 1)


def assign_bins(energies, edges) -> np.ndarray:
    """Bin index per energy; the top edge belongs to the last bin."""
    n_bins = len(edges) - 1
    idx = np.searchsorted(edges, energies, side="right") - 1
    return np.clip(idx, 0, n_bins - 1)


def record_rmse(output, label) -> np.ndarray:
    """Per-record RMSE over all ``2 * n`` outputs."""
    d = np.asarray(output, dtype=np.float64) - np.asarray(label, dtype=np.float64)
    return np.sqrt(np.mean(d * d, axis=(1, 2)))


def rmse_by_energy(model, dataset, n_bins: int = N_BINS, direction=None) -> list:
    """Mean per-record RMSE in each log-spaced energy bin.

    Parameters
    ----------
    model : ModelState or transform
        A transform must carry ``direction`` or the ``direction`` argument
        must be given.

    Returns
    -------
    list of dict
        ``{"center_pj", "rmse", "count"}`` for every non-empty bin.
    """
    records = _records(dataset)
    if isinstance(model, ModelState):
        fn = model_transform(model)
    else:
        fn = model
    direction = Direction.parse(direction or getattr(fn, "direction", None))
    if not records:
        return []
    inputs, labels = training_pairs(records, direction)
    rm = record_rmse(fn(inputs, records), labels)
    energies = np.array([r.energy_pj for r in records])
    edges = energy_bin_edges(energies, n_bins)
    idx = assign_bins(energies, edges)
    out = []
    for b in range(n_bins):
        sel = idx == b
        if sel.any():
            out.append({"center_pj": float(math.sqrt(edges[b] * edges[b + 1])), "rmse": float(rm[sel].mean()),
                        "count": int(sel.sum())})
    return out


# ---------------------------------------------------------------- back to back


@dataclass
class B2BResult:
    error_bits: np.ndarray
    total_bits: np.ndarray
    failures: int = 0

    @property
    def ber(self) -> float:
        t = int(self.total_bits.sum())
        return float(self.error_bits.sum()) / t if t else 0.0


def back_to_back(inft_transform, nft_transform, dataset, batch: int = EVAL_BATCH) -> B2BResult:
    """Modulated spectrum -> iNFT -> NFT -> de-normalise -> demodulate -> count bit errors.

    A record whose classical transform raises a numerical fault counts all of
    its bits as errors and is tallied in ``failures``.
    """
    records = _records(dataset)
    errs = np.zeros(len(records), dtype=np.int64)
    bits = np.array([r.bits.size for r in records], dtype=np.int64)
    failures = 0
    for s in range(0, len(records), batch):
        chunk = records[s:s + batch]
        x = np.stack([complex_to_rows(r.nonlinear.values) for r in chunk])
        try:
            y = nft_transform(inft_transform(x, chunk), chunk)
            ok = [True] * len(chunk)
        except NumericalFault:
            y, ok = _per_record(inft_transform, nft_transform, x, chunk)
        y = np.asarray(y)
        if y.shape != x.shape:
            raise InvalidArgument(f"transform returned shape {y.shape}, expected {x.shape}")
        for j, rec in enumerate(chunk):
            if not ok[j]:
                errs[s + j] = rec.bits.size
                failures += 1
                continue
            ng = rec.nonlinear.grid
            Q = SpectrumSamples(ng, rows_to_complex(y[j]) * rec.nonlinear_norm, SpectrumKind.NonlinearQ)
            rx = nfdm_demodulate(Q, rec.config)
            errs[s + j] = int(np.count_nonzero(rx.bits != rec.bits))
    return B2BResult(errs, bits, failures)


def _per_record(inft, nft, x, chunk):
    y = np.zeros_like(x)
    ok = []
    for j, rec in enumerate(chunk):
        try:
            y[j] = nft(inft(x[j:j + 1], [rec]), [rec])[0]
            ok.append(True)
        except NumericalFault:
            ok.append(False)
    return y, ok


# ---------------------------------------------------------------- reports


@dataclass
class BinRow:
    center_pj: float
    rmse_nft: float | None
    rmse_inft: float | None
    ber_nn: float | None
    ber_classical: float | None
    count: int = 0


@dataclass
class GroupRow:
    key: int
    count: int
    energy_pj: float
    rmse_nft: float | None
    rmse_inft: float | None
    ber_nn: float | None
    ber_classical: float | None


@dataclass
class EvalReport:
    energy_bins: list = field(default_factory=list)
    by_subcarrier: list = field(default_factory=list)
    by_qam: list = field(default_factory=list)
    totals: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "energy_bins": [asdict(r) for r in self.energy_bins],
            "by_subcarrier": [_group_dict(r, "n_sub") for r in self.by_subcarrier],
            "by_qam": [_group_dict(r, "qam_order") for r in self.by_qam],
            "totals": dict(self.totals),
        }

    @classmethod
    def from_dict(cls, d) -> "EvalReport":
        def group(rows, key):
            out = []
            for r in rows:
                r = dict(r)
                out.append(GroupRow(key=r.pop(key), **r))
            return out

        return cls(
            energy_bins=[BinRow(**r) for r in d.get("energy_bins", [])],
            by_subcarrier=group(d.get("by_subcarrier", []), "n_sub"),
            by_qam=group(d.get("by_qam", []), "qam_order"),
            totals=dict(d.get("totals", {})),
        )


def _group_dict(row, key_name):
    d = asdict(row)
    d = {key_name: d.pop("key"), **d}
    return d


def _mean_or_none(values, sel):
    if values is None:
        return None
    return float(values[sel].mean())


def _ber_or_none(res, sel):
    if res is None:
        return None
    t = int(res.total_bits[sel].sum())
    return float(res.error_bits[sel].sum()) / t if t else 0.0


def breakdown_by(dataset, key: str, rmse_nft=None, rmse_inft=None, nn=None, classical=None) -> list:
    """Group records by ``"subcarriers"`` or ``"qam"`` and summarise each group.

    Per-record metric arrays (or B2B results) are aligned with the dataset.
    """
    records = _records(dataset)
    if key in ("subcarriers", "n_sub"):
        keys = np.array([r.config.n_subcarriers for r in records])
    elif key in ("qam", "qam_order"):
        keys = np.array([r.config.qam_order for r in records])
    else:
        raise InvalidArgument(f"unknown breakdown key {key!r}")
    energies = np.array([r.energy_pj for r in records])
    rows = []
    for k in sorted(set(keys.tolist())):
        sel = keys == k
        rows.append(
            GroupRow(
                key=int(k),
                count=int(sel.sum()),
                energy_pj=float(energies[sel].mean()),
                rmse_nft=_mean_or_none(rmse_nft, sel),
                rmse_inft=_mean_or_none(rmse_inft, sel),
                ber_nn=_ber_or_none(nn, sel),
                ber_classical=_ber_or_none(classical, sel),
            )
        )
    return rows


def evaluate(dataset, nft_model: ModelState | None = None, inft_model: ModelState | None = None,
             classical: bool = False, n_bins: int = N_BINS) -> EvalReport:
    """Full report: energy bins, per-subcarrier and per-QAM tables, bit totals."""
    records = _records(dataset)
    if not records:
        return EvalReport(totals={"error_bits_nn": None, "error_bits_classical": None, "total_bits": 0})
    rm_nft = rm_inft = nn = cl = None
    if nft_model is not None:
        if nft_model.spec.direction is not Direction.NFT:
            raise InvalidArgument("nft_model is not an NFT-direction model")
        x, y = training_pairs(records, Direction.NFT)
        rm_nft = record_rmse(model_transform(nft_model)(x), y)
    if inft_model is not None:
        if inft_model.spec.direction is not Direction.INFT:
            raise InvalidArgument("inft_model is not an iNFT-direction model")
        x, y = training_pairs(records, Direction.INFT)
        rm_inft = record_rmse(model_transform(inft_model)(x), y)
    if nft_model is not None and inft_model is not None:
        nn = back_to_back(model_transform(inft_model), model_transform(nft_model), records)
    if classical:
        cl = back_to_back(classical_inft, classical_nft, records)
    energies = np.array([r.energy_pj for r in records])
    edges = energy_bin_edges(energies, n_bins)
    idx = assign_bins(energies, edges)
    bins = []
    for b in range(n_bins):
        sel = idx == b
        if not sel.any():
            continue
        bins.append(
            BinRow(
                center_pj=float(math.sqrt(edges[b] * edges[b + 1])),
                rmse_nft=_mean_or_none(rm_nft, sel),
                rmse_inft=_mean_or_none(rm_inft, sel),
                ber_nn=_ber_or_none(nn, sel),
                ber_classical=_ber_or_none(cl, sel),
                count=int(sel.sum()),
            )
        )
    total_bits = int(sum(r.bits.size for r in records))
    return EvalReport(
        energy_bins=bins,
        by_subcarrier=breakdown_by(records, "subcarriers", rm_nft, rm_inft, nn, cl),
        by_qam=breakdown_by(records, "qam", rm_nft, rm_inft, nn, cl),
        totals={
            "error_bits_nn": None if nn is None else int(nn.error_bits.sum()),
            "error_bits_classical": None if cl is None else int(cl.error_bits.sum()),
            "total_bits": total_bits,
        },
    )


def low_power_agreement(dataset, fraction: float = 0.1) -> float:
    """Mean max-abs gap between normalised linear and nonlinear spectra over the
    lowest-energy ``fraction`` of records."""
    records = sorted(_records(dataset), key=lambda r: r.energy_pj)
    k = max(1, int(round(len(records) * fraction)))
    gaps = [np.max(np.abs(r.linear.values - r.nonlinear.values)) for r in records[:k]]
    return float(np.mean(gaps))


def _fmt(v):
    return "" if v is None else repr(float(v))


def emit_report(report: EvalReport, path, fmt: str = "json") -> None:
    """Write ``report`` as JSON (all tables) or CSV (energy-bin table)."""
    path = Path(path)
    if fmt == "json":
        text = json.dumps(report.to_dict(), indent=2) + "\n"
    elif fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in report.energy_bins:
            w.writerow([_fmt(r.center_pj), _fmt(r.rmse_nft), _fmt(r.rmse_inft), _fmt(r.ber_nn), _fmt(r.ber_classical)])
        text = buf.getvalue()
    else:
        raise InvalidArgument(f"unknown report format {fmt!r}; expected 'json' or 'csv'")
    try:
        path.write_text(text)
    except OSError as exc:
        raise NftError(f"cannot write report {path}: {exc}") from exc


def read_report(path, fmt: str | None = None) -> EvalReport:
    path = Path(path)
    fmt = fmt or ("csv" if path.suffix == ".csv" else "json")
    try:
        text = path.read_text()
    except OSError as exc:
        raise NftError(f"cannot read report {path}: {exc}") from exc
    if fmt == "json":
        return EvalReport.from_dict(json.loads(text))
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != CSV_HEADER:
        raise NftError(f"{path}: unexpected CSV header")

    def val(s):
        return None if s == "" else float(s)

    return EvalReport(energy_bins=[BinRow(*[val(c) for c in r]) for r in rows[1:]])


# ---------------------------------------------------------------- probes


@dataclass(frozen=True, eq=False)
class Probe:
    name: str
    direction: Direction
    input: np.ndarray
    label: np.ndarray


SECH_AMPLITUDE = 0.4  # amplitude x width; solitons appear above 0.5
SINC_AMPLITUDE = 0.3
PROBE_WIDTH = 40e-12
SPECTRAL_AMPLITUDE = 0.5


def _normalised_rows(v):
    m = np.max(np.abs(v))
    return complex_to_rows(v / m if m else v)


def probe_set(direction, n_samples: int = 2048, sample_rate: float = 96e9) -> list:
    """Out-of-distribution pulses for generalisation checks.

    NFT probes are time-domain pulses ``A sech(t/T)`` and ``-A sinc(t/T)``;
    iNFT probes are spectra ``A sech(lambda tau) exp(-i pi/4)`` and
    ``i A rect(lambda)``. Amplitudes keep every probe soliton-free.
    """
    direction = Direction.parse(direction)
    tg = burst_time_grid(n_samples, sample_rate)
    ng = make_nonlinear_grid(tg)
    t = tg.times()
    lam = ng.lambda_values
    probes = []
    if direction is Direction.NFT:
        T = PROBE_WIDTH
        pulses = {
            "sech_time": (SECH_AMPLITUDE / T) / np.cosh(t / T),
            "sinc_time": -(SINC_AMPLITUDE / T) * np.sinc(t / T),
        }
        for name, samples in pulses.items():
            q = TimeSignal(tg, samples.astype(np.complex128))
            L = linear_surrogate_spectrum(q).values
            Q = forward_nft(q, ng, "bo").q_spec.values
            probes.append(Probe(name, direction, _normalised_rows(L), _normalised_rows(Q)))
    else:
        width = 0.1 * ng.lambda_max
        spectra = {
            "sech_lambda": SPECTRAL_AMPLITUDE / np.cosh(lam / width) * np.exp(-0.25j * np.pi),
            "rect_lambda": 1j * SPECTRAL_AMPLITUDE * (np.abs(lam) <= 0.3 * ng.lambda_max),
        }
        for name, values in spectra.items():
            Q = SpectrumSamples(ng, values, SpectrumKind.NonlinearQ)
            q = inverse_nft(Q, tg, strict=False)
            L = linear_surrogate_spectrum(q).values
            probes.append(Probe(name, direction, _normalised_rows(values), _normalised_rows(L)))
    return probes


def run_probes(state: ModelState, out_dir=None) -> dict:
    """RMSE of ``state`` on its direction's probes; optionally dump raw f32 files."""
    probes = probe_set(state.spec.direction, state.spec.length)
    fn = model_transform(state)
    x = np.stack([p.input for p in probes])
    y = fn(x)
    rm = record_rmse(y, np.stack([p.label for p in probes]))
    out = {p.name: float(r) for p, r in zip(probes, rm)}
    if out_dir is not None:
        d = Path(out_dir)
        d.mkdir(parents=True, exist_ok=True)
        for p, yy in zip(probes, y):
            for tag, arr in (("input", p.input), ("output", yy), ("label", p.label)):
                inter = np.empty(2 * arr.shape[1], dtype="<f4")
                inter[0::2] = arr[0]
                inter[1::2] = arr[1]
                (d / f"{p.name}_{tag}.f32").write_bytes(inter.tobytes())
    return out
