"""Objective evaluation of predicted EDCs against targets."""

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from . import BANDS_HZ, HEADLINE_BAND, N_BANDS
from .edc import DEFAULT_EPSILON, clarity_c50, decay_times, to_db
from .recon import RssConfig, reconstruct_bands

JND_FRACTION = 0.05
MONOTONIC_STRIDE = 50
MONOTONIC_TOLERANCE_DB = 0.5
C50_RSS_SEED = 0
PARAMETERS = ("edt", "t20", "t30", "c50")


def r_squared(pred, target):
    """Coefficient of determination; NaN when undefined (n < 2 or constant target)."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if target.size < 2:
        return math.nan
    ss_tot = float(np.sum((target - target.mean()) ** 2))
    if ss_tot == 0.0:
        return math.nan
    return 1.0 - float(np.sum((pred - target) ** 2)) / ss_tot


def jnd_pass(pred_t30, true_t30, threshold=JND_FRACTION):
    if not true_t30 > 0:
        raise ValueError(f"reference T30 must be positive, got {true_t30}")
    return abs(pred_t30 - true_t30) / true_t30 <= threshold


def error_stats(pred, target):
    """RMSE/MAE/R² over entries where both sides are finite; the rest are counted as excluded."""
    pred = np.asarray(pred, dtype=np.float64).ravel()
    target = np.asarray(target, dtype=np.float64).ravel()
    ok = np.isfinite(pred) & np.isfinite(target)
    p, t = pred[ok], target[ok]
    n = int(ok.sum())
    if n == 0:
        return {"rmse": None, "mae": None, "r2": None, "n": 0, "excluded": int(ok.size)}
    err = p - t
    r2 = r_squared(p, t)
    return {
        "rmse": float(np.sqrt(np.mean(err * err))),
        "mae": float(np.mean(np.abs(err))),
        "r2": None if math.isnan(r2) else r2,
        "n": n,
        "excluded": int(ok.size - n),
    }


def rising_fraction(edcs, stride=MONOTONIC_STRIDE, tol_db=MONOTONIC_TOLERANCE_DB, epsilon=DEFAULT_EPSILON):
    """Fraction of rows whose dB curve rises by more than ``tol_db`` over some ``stride`` window."""
    db = to_db(np.maximum(np.asarray(edcs, dtype=np.float64), 0.0), epsilon)
    rows = db.reshape(-1, db.shape[-1])
    if rows.shape[-1] <= stride:
        stride = rows.shape[-1] - 1
    rises = (rows[:, stride:] - rows[:, :-stride]).max(axis=1) > tol_db
    return float(rises.mean())


def clarity_table(edcs, frame_dt, fs, seed=C50_RSS_SEED):
    """Per-band and broadband C50 of RIRs reconstructed from EDCs (rooms, bands+1)."""
    edcs = np.asarray(edcs, dtype=np.float64)
    out = np.full((edcs.shape[0], edcs.shape[1] + 1), np.nan)
    for r, room in enumerate(edcs):
        bands = reconstruct_bands(room, frame_dt, fs, RssConfig(seed=seed))
        for b, sig in enumerate(bands):
            if np.any(sig):
                out[r, b] = clarity_c50(sig, fs).db
        total = bands.sum(axis=0)
        if np.any(total):
            out[r, -1] = clarity_c50(total, fs).db
    return out


def acoustic_table(edcs, frame_dt, fs, epsilon=DEFAULT_EPSILON):
    """Decay times (rooms, bands) and C50 (rooms, bands + broadband) from one code path."""
    params = decay_times(edcs, frame_dt, epsilon)
    params["c50"] = clarity_table(edcs, frame_dt, fs)
    return params


REPORT_SCHEMA = {
    "type": "object",
    "required": ["n_rooms", "headline_band_hz", "parameters", "t30_jnd", "edc_error", "scatter", "monotonicity"],
    "definitions": {
        "stats": {
            "type": "object",
            "required": ["rmse", "mae", "r2", "n", "excluded"],
            "properties": {
                "rmse": {"type": ["number", "null"], "minimum": 0},
                "mae": {"type": ["number", "null"], "minimum": 0},
                "r2": {"type": ["number", "null"], "maximum": 1},
                "n": {"type": "integer", "minimum": 0},
                "excluded": {"type": "integer", "minimum": 0},
            },
        },
    },
    "properties": {
        "n_rooms": {"type": "integer", "minimum": 1},
        "headline_band_hz": {"type": "number"},
        "parameters": {
            "type": "object",
            "required": list(PARAMETERS),
            "additionalProperties": {
                "type": "object",
                "required": ["headline", "aggregate", "per_band"],
                "properties": {
                    "headline": {"$ref": "#/definitions/stats"},
                    "aggregate": {"$ref": "#/definitions/stats"},
                    "broadband": {"$ref": "#/definitions/stats"},
                    "per_band": {"type": "array", "items": {"$ref": "#/definitions/stats"},
                                 "minItems": N_BANDS, "maxItems": N_BANDS},
                },
            },
        },
        "t30_jnd": {
            "type": "object",
            "required": ["headline_pass_fraction", "aggregate_pass_fraction", "n_headline", "n_aggregate"],
            "properties": {
                "headline_pass_fraction": {"type": ["number", "null"], "minimum": 0, "maximum": 1},
                "aggregate_pass_fraction": {"type": ["number", "null"], "minimum": 0, "maximum": 1},
            },
        },
        "edc_error": {
            "type": "object",
            "required": ["time_s", "mae_db", "rmse_db"],
        },
        "scatter": {"type": "object"},
        "monotonicity": {
            "type": "object",
            "required": ["predicted_rising_fraction", "target_rising_fraction", "stride", "tolerance_db"],
        },
        "stamp": {"type": "object"},
    },
}


@dataclass
class EvalReport:
    data: dict
    stamp: dict = field(default_factory=dict)

    def to_dict(self):
        d = dict(self.data)
        d["stamp"] = self.stamp
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d):
        validate_report(d)
        d = dict(d)
        stamp = d.pop("stamp", {})
        return cls(d, stamp)

    def validate(self):
        validate_report(self.to_dict())

    def stat(self, param, scope="headline"):
        return self.data["parameters"][param][scope]


def validate_report(d):
    jsonschema.validate(d, REPORT_SCHEMA)
    for name, entry in d["parameters"].items():
        for s in [entry["headline"], entry["aggregate"], *entry["per_band"]]:
            if s["rmse"] is not None and s["rmse"] + 1e-12 < s["mae"]:
                raise jsonschema.ValidationError(f"{name}: RMSE {s['rmse']} < MAE {s['mae']}")


def _jnd_fraction(pred, target):
    ok = np.isfinite(pred) & np.isfinite(target) & (target > 0)
    if not ok.any():
        return None, 0
    passes = [jnd_pass(p, t) for p, t in zip(pred[ok], target[ok])]
    return float(np.mean(passes)), int(ok.sum())


def evaluate_predictions(pred_edcs, target_edcs, frame_dt, fs, epsilon=DEFAULT_EPSILON, stamp=None):
    """Compare predicted and target EDC stacks of shape (rooms, bands, L).

    Both sides go through identical parameter extraction.
    """
    pred_edcs = np.asarray(pred_edcs, dtype=np.float64)
    target_edcs = np.asarray(target_edcs, dtype=np.float64)
    if pred_edcs.shape != target_edcs.shape or pred_edcs.ndim != 3:
        raise ValueError(f"shape mismatch: {pred_edcs.shape} vs {target_edcs.shape}")
    n_rooms, n_bands, L = pred_edcs.shape
    pred_p = acoustic_table(pred_edcs, frame_dt, fs, epsilon)
    targ_p = acoustic_table(target_edcs, frame_dt, fs, epsilon)

    params = {}
    for name in PARAMETERS:
        p, t = pred_p[name], targ_p[name]
        entry = {
            "headline": error_stats(p[:, HEADLINE_BAND], t[:, HEADLINE_BAND]),
            "aggregate": error_stats(p[:, :n_bands], t[:, :n_bands]),
            "per_band": [error_stats(p[:, b], t[:, b]) for b in range(n_bands)],
        }
        if name == "c50":
            entry["broadband"] = error_stats(p[:, -1], t[:, -1])
        params[name] = entry

    head_frac, head_n = _jnd_fraction(pred_p["t30"][:, HEADLINE_BAND], targ_p["t30"][:, HEADLINE_BAND])
    agg_frac, agg_n = _jnd_fraction(pred_p["t30"].ravel(), targ_p["t30"].ravel())

    err = to_db(np.maximum(pred_edcs, 0), epsilon) - to_db(target_edcs, epsilon)
    data = {
        "n_rooms": n_rooms,
        "headline_band_hz": BANDS_HZ[HEADLINE_BAND],
        "frame_dt": frame_dt,
        "sample_rate": fs,
        "parameters": params,
        "t30_jnd": {
            "threshold": JND_FRACTION,
            "headline_pass_fraction": head_frac,
            "aggregate_pass_fraction": agg_frac,
            "n_headline": head_n,
            "n_aggregate": agg_n,
        },
        "edc_error": {
            "time_s": (np.arange(L) * frame_dt).tolist(),
            "mae_db": np.mean(np.abs(err), axis=(0, 1)).tolist(),
            "rmse_db": np.sqrt(np.mean(err * err, axis=(0, 1))).tolist(),
        },
        "scatter": {
            name: {
                "pred": [_num(v) for v in pred_p[name][:, HEADLINE_BAND]],
                "target": [_num(v) for v in targ_p[name][:, HEADLINE_BAND]],
            }
            for name in PARAMETERS
        },
        "monotonicity": {
            "stride": MONOTONIC_STRIDE,
            "tolerance_db": MONOTONIC_TOLERANCE_DB,
            "predicted_rising_fraction": rising_fraction(pred_edcs, epsilon=epsilon),
            "target_rising_fraction": rising_fraction(target_edcs, epsilon=epsilon),
        },
    }
    report = EvalReport(data, stamp or {})
    report.validate()
    return report


def _num(v):
    return None if not np.isfinite(v) else float(v)


def predict_edcs(model, features_scaled, batch_size=64):
    out = []
    for start in range(0, len(features_scaled), batch_size):
        out.append(np.asarray(model.forward(features_scaled[start:start + batch_size]), dtype=np.float64))
    return np.concatenate(out)


def evaluate(model, features_scaled, target_edcs, frame_dt, fs, epsilon=DEFAULT_EPSILON, stamp=None):
    pred = predict_edcs(model, features_scaled)
    return evaluate_predictions(pred, target_edcs, frame_dt, fs, epsilon, stamp), pred


def write_plot_data(report, pred_edcs, target_edcs, out_dir, n_examples=4, epsilon=DEFAULT_EPSILON):
    """CSV analogues of the error-over-time, scatter and example-curve figures."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    err = report.data["edc_error"]
    with open(out_dir / "edc_error.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time_s", "mae_db", "rmse_db"])
        w.writerows(zip(err["time_s"], err["mae_db"], err["rmse_db"]))
    for name in ("t30", "edt"):
        sc = report.data["scatter"][name]
        with open(out_dir / f"{name}_scatter.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["room", "target_s", "pred_s"])
            w.writerows((i, t, p) for i, (t, p) in enumerate(zip(sc["target"], sc["pred"])))
    n = min(n_examples, len(pred_edcs))
    pdb = to_db(np.maximum(np.asarray(pred_edcs[:n], dtype=np.float64), 0), epsilon)[:, HEADLINE_BAND]
    tdb = to_db(np.asarray(target_edcs[:n], dtype=np.float64), epsilon)[:, HEADLINE_BAND]
    with open(out_dir / "edc_examples.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        header = ["time_s"]
        for i in range(n):
            header += [f"room{i}_target_db", f"room{i}_pred_db"]
        w.writerow(header)
        for j, t in enumerate(err["time_s"]):
            row = [t]
            for i in range(n):
                row += [tdb[i, j], pdb[i, j]]
            w.writerow(row)


def markdown_table(report_dict):
    """Summary table with RMSE/MAE/R² rows for EDT, T20, T30 and C50 (headline band)."""
    rows = [("EDT (s)", "edt"), ("T20 (s)", "t20"), ("T30 (s)", "t30"), ("C50 (dB)", "c50")]

    def fmt(v):
        return "n/a" if v is None else f"{v:.2f}"

    hz = report_dict["headline_band_hz"]
    lines = [
        f"Predictive performance on {report_dict['n_rooms']} test rooms ({hz:g} Hz band)",
        "",
        "| Parameter | RMSE | MAE | R² |",
        "|---|---|---|---|",
    ]
    for label, key in rows:
        s = report_dict["parameters"][key]["headline"]
        lines.append(f"| {label} | {fmt(s['rmse'])} | {fmt(s['mae'])} | {fmt(s['r2'])} |")
    jnd = report_dict["t30_jnd"]["headline_pass_fraction"]
    lines += ["", f"T30 within 5% JND: {'n/a' if jnd is None else f'{100 * jnd:.1f}%'}"]
    bb = report_dict["parameters"]["c50"].get("broadband")
    if bb:
        lines.append(f"Broadband C50: RMSE {fmt(bb['rmse'])} dB, MAE {fmt(bb['mae'])} dB, R² {fmt(bb['r2'])}")
    mono = report_dict["monotonicity"]["predicted_rising_fraction"]
    lines.append(f"Predicted rows rising > 0.5 dB over a stride-50 window: {100 * mono:.1f}%")
    return "\n".join(lines) + "\n"
