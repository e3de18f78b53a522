"""Command-line entry point: ``nanopairs {spectrum,sfg,spdc,coincidence,analyze}``.

Exit codes: 0 success, 2 usage or configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from ._accel import set_threads
from .config import SECTIONS, ConfigError, dump, resolve
from .errors import ConvergenceError, FitError, ParseError

__all__ = ["main", "build_parser"]

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        return float(obj) if np.isfinite(obj) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


class Outputs:
    """Writes files under ``out`` with the resolved config embedded in each."""

    def __init__(self, out: Path, cfg: dict, command: str):
        self.out = Path(out)
        self.cfg = cfg
        self.command = command
        self.out.mkdir(parents=True, exist_ok=True)
        self.written = []

    @property
    def stamp(self) -> str:
        return f"nanopairs {__version__} {self.command} seed={self.cfg['seed']} config={dump(self.cfg)}"

    def _write(self, name, data, mode="w"):
        path = self.out / name
        with open(path, mode, **({} if "b" in mode else {"newline": ""})) as f:
            f.write(data)
        self.written.append(str(path))
        return path

    def csv(self, name, text):
        return self._write(name, f"# {self.stamp}\n" + text)

    def json(self, name, obj):
        doc = {"nanopairs_version": __version__, "command": self.command, "seed": self.cfg["seed"],
               "config": self.cfg, **obj}
        return self._write(name, json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n")

    def text(self, name, text):
        return self._write(name, text)

    def binary(self, name, data: bytes):
        return self._write(name, data, "wb")


# -- config to domain objects ----------------------------------------------------------


def _geometry(cfg):
    from .cda import Geometry

    g = cfg["geometry"]
    shape = str(g["shape"]).lower()
    try:
        if shape == "cylinder":
            return Geometry.cylinder(float(g["diameter_nm"]), float(g["height_nm"]))
        if shape == "sphere":
            if g["radius_nm"] is None:
                raise ConfigError("geometry.radius_nm is required for a sphere")
            return Geometry.sphere(float(g["radius_nm"]))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid geometry: {exc}") from exc
    raise ConfigError(f"geometry.shape must be cylinder or sphere, got {shape!r}")


def _dispersion(cfg):
    from .materials import algaas, constant_index, load_table

    m = cfg["materials"]
    if m["constant_index"] is not None:
        n = m["constant_index"]
        return constant_index(complex(n) if not isinstance(n, (list, tuple)) else complex(n[0], n[1]))
    if m["table"] is not None:
        return load_table(Path(m["table"]))
    if str(m["material"]).lower() != "algaas":
        raise ConfigError("materials.material must be 'algaas' unless a table or constant index is given")
    return algaas()


def _grid(spec, name):
    if spec is None:
        return None
    if not isinstance(spec, (list, tuple)) or len(spec) not in (0, 3):
        raise ConfigError(f"solver.{name} must be [start, stop, step] or null")
    if len(spec) == 0:
        return np.empty(0)
    start, stop, step = (float(v) for v in spec)
    if step <= 0:
        raise ConfigError(f"solver.{name}: step must be > 0")
    n = int(np.floor((stop - start) / step + 1e-9)) + 1
    return start + step * np.arange(max(n, 0))


def _na(cfg):
    na = cfg["sfg"]["na"]
    if not isinstance(na, (int, float)) or not 0 < na <= 1:
        raise ConfigError(f"sfg.na must satisfy 0 < NA <= 1, got {na!r}")
    return float(na)


# -- commands -----------------------------------------------------------------------


def cmd_spectrum(cfg, out: Outputs, workers: int = 1):
    from .cda import scattering_spectrum
    from .mie import mie_reference
    from .multipole import fit_resonance

    s = cfg["solver"]
    geom = _geometry(cfg)
    disp = _dispersion(cfg)
    nb = float(cfg["materials"]["background_index"])
    windows = []
    for win in ("ir", "pump"):
        grid = _grid(s[f"{win}_grid_nm"], f"{win}_grid_nm")
        if grid is None:
            continue
        if grid.size == 0:
            raise ConfigError(f"solver.{win}_grid_nm is an empty wavelength grid")
        fw = s[f"fit_window_{win}_nm"]
        if fw is not None:
            if not isinstance(fw, (list, tuple)) or len(fw) != 2 or not all(isinstance(v, (int, float)) for v in fw):
                raise ConfigError(f"solver.fit_window_{win}_nm must be [lo, hi] or null")
            fw = [float(v) for v in fw]
        windows.append((win, grid, fw))
    if not windows:
        raise ConfigError("no wavelength grid configured")
    fits = {}
    for win, grid, fit_window in windows:
        spacing = s["spacing_ir_nm"] if win == "ir" else s["spacing_pump_nm"]
        tol = s["tol"] if win == "ir" else s["tol_pump"]
        method = s["method"] if win == "ir" else s["method_pump"]
        if method not in ("fft", "direct", "mirror"):
            raise ConfigError(f"unknown solver method {method!r}")
        spec = scattering_spectrum(geom, grid, s["excitation"], s["polarization"], spacing, float(tol), disp, nb,
                                   int(s["max_iter"]), True, True, workers, method)
        out.csv(f"spectrum_{win}.csv", spec.to_csv(bool(s["quadrupoles"])))
        entry = {"spacing_nm": spec.meta["spacing_nm"], "tol": tol, "method": method}
        channels = ("MD", "total") if win == "ir" else ("total", "ED")
        entry["fit_window_nm"] = fit_window
        for ch in channels:
            try:
                entry[ch] = fit_resonance(spec, ch, entry["fit_window_nm"]).to_dict()
            except FitError as exc:
                entry[ch] = {"error": str(exc)}
        i = int(np.argmax(spec.column("q_sca")))
        part = spec.entries[i].partials
        entry["peak_lambda_nm"] = spec.entries[i].wavelength
        entry["peak_partials"] = part
        entry["dominant_at_peak"] = max(part, key=part.get) if part else None
        if geom.shape == "sphere":
            rel = []
            rows = ["lambda_nm,Q_sca_mie,Q_ext_mie,Q_sca_cda,rel_dev"]
            for e in spec.entries:
                n = complex(disp(e.wavelength)) / nb
                q_sca, q_ext = mie_reference(geom.radius, n, e.wavelength / nb)
                dev = abs(e.q_sca - q_sca) / q_sca
                rel.append(dev)
                rows.append(f"{e.wavelength:.6g},{q_sca:.10g},{q_ext:.10g},{e.q_sca:.10g},{dev:.6g}")
            out.csv(f"mie_reference_{win}.csv", "\n".join(rows) + "\n")
            entry["mie_max_rel_dev"] = max(rel)
        fits[win] = entry
    out.json("fits.json", {"fits": fits})
    return fits


def sfg_setup(cfg):
    """SfgSetup described by the ``sfg``, ``solver``, ``geometry`` and ``materials`` sections."""
    from .materials import rotation_z
    from .sfg import SfgSetup

    f = cfg["sfg"]
    na = _na(cfg)
    m = cfg["materials"]
    rot = float(m["crystal_rotation_deg"])
    return SfgSetup(
        geometry=_geometry(cfg),
        lambda_s=float(f["lambda_s_nm"]),
        lambda_i=float(f["lambda_i_nm"]),
        spacing=float(cfg["solver"]["spacing_ir_nm"]),
        waist_nm=float(f["waist_nm"]),
        power_s=float(f["power_s_w"]),
        power_i=float(f["power_i_w"]),
        na=na,
        tol=float(cfg["solver"]["tol"]),
        d14=float(m["d14_pm_per_v"]),
        crystal_rotation=None if rot == 0 else tuple(map(tuple, rotation_z(np.deg2rad(rot)))),
        background_index=float(m["background_index"]),
        n_theta=int(f["n_theta"]),
        n_phi=int(f["n_phi"]),
        image_pixels=int(f["image_pixels"]),
    )


def cmd_sfg(cfg, out: Outputs):
    from .sfg import (LABELS, collected_power, far_field, hemisphere_grid, linear_fields,
                      nonlinear_polarization, sfg_efficiency, sfg_map_16)
    from .polarization import STANDARD_STATES

    f = cfg["sfg"]
    setup = sfg_setup(cfg)
    lin = linear_fields(setup, _dispersion(cfg))
    analyzer = f["analyzer"]
    smap = sfg_map_16(setup, None if analyzer in (None, "none") else analyzer, lin, bool(f["images"]))
    out.csv("sfg_map.csv", smap.to_csv())
    for key, img in smap.extras["images"].items():
        out.text(f"bfp_{key}.pgm", img.to_pgm(comment=out.stamp))
        out.json(f"bfp_{key}.json", {"image": img.sidecar(), "signal": key[0], "idler": key[1]})
    # efficiency of the strongest configuration
    a, b = np.unravel_index(int(np.argmax(smap.raw)), smap.raw.shape)
    es = lin.field("s", STANDARD_STATES[LABELS[a]], smap.extras["amplitude_s"])
    ei = lin.field("i", STANDARD_STATES[LABELS[b]], smap.extras["amplitude_i"])
    far = far_field(nonlinear_polarization(es, ei, setup.chi2()), lin.lattice_s,
                    hemisphere_grid(setup.n_theta, setup.n_phi, setup.na))
    eff = sfg_efficiency(collected_power(far, None), setup.power_s, setup.power_i, setup.spot_area,
                         setup.spot_area, collected_power(far, "H"), collected_power(far, "V"))
    report = {
        "lambda_sf_nm": setup.lambda_sf,
        "analyzer": smap.analyzer,
        "labels": list(LABELS),
        "table": smap.table,
        "collected_w": smap.raw,
        "max_entry": LABELS[a] + LABELS[b],
        "efficiency": eff.to_dict(),
        "spacing_nm": lin.lattice_s.spacing,
    }
    out.json("sfg.json", report)
    return smap, report


def cmd_spdc(cfg, out: Outputs):
    from .spdc import predict

    p = cfg["spdc"]
    length = p["normalization_length_m"]
    if length is None:
        length = float(cfg["geometry"]["height_nm"] if cfg["geometry"]["shape"] == "cylinder"
                       else 2 * cfg["geometry"]["radius_nm"]) * 1e-9
    pred = predict(
        eta=float(p["eta_per_w"]),
        pump_power=float(p["pump_power_w"]),
        spot_diameter_m=float(p["spot_diameter_m"]),
        lambda_p=float(p["lambda_p_nm"]),
        lambda_s=None if p["lambda_s_nm"] is None else float(p["lambda_s_nm"]),
        lambda_i=None if p["lambda_i_nm"] is None else float(p["lambda_i_nm"]),
        delta_lambda=float(p["delta_lambda_nm"]),
        sfg_spot_diameter_m=None if p["sfg_spot_diameter_m"] is None else float(p["sfg_spot_diameter_m"]),
        length=float(length),
    )
    out.json("spdc.json", pred.to_dict())
    return pred


def _experiment(cfg):
    from .photonstats import ExperimentConfig

    d = cfg["detection"]
    try:
        return ExperimentConfig(
            pair_rate=float(d["pair_rate_hz"]), eta_arm=float(d["eta_arm"]), split=float(d["split"]),
            dark_rate=float(d["dark_rate_hz"]), delay_ns=float(d["delay_ns"]), bin_ps=float(d["bin_ps"]),
            bins=int(d["bins"]), duration_s=float(d["duration_s"]), thermal_rate=float(d["thermal_rate_hz"]),
            thermal_sigma_ns=float(d["thermal_sigma_ns"]), jitter_ps=float(d["jitter_ps"]),
            dead_time_us=float(d["dead_time_us"]), seed=int(cfg["seed"]),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid detection settings: {exc}") from exc


def _analysis_outputs(out: Outputs, h, exp, extra=None):
    from .photonstats import analyze, histogram_csv

    report = analyze(h, exp.eta_arm, exp.split)
    out.csv("histogram.csv", histogram_csv(h))
    out.json("analysis.json", {**report, **(extra or {})})
    return report


def cmd_coincidence(cfg, out: Outputs):
    from .photonstats import correlate, expected_coincidences, simulate_timetags, write_tags_csv, write_ttg

    exp = _experiment(cfg)
    s1, s2 = simulate_timetags(exp)
    if cfg["output"]["write_tags"]:
        fmt = str(cfg["detection"]["tag_format"]).lower()
        if fmt == "ttg":
            path = out.out / "tags.ttg"
            write_ttg(path, [s1, s2])
            out.written.append(str(path))
            out.json("tags.json", {"file": "tags.ttg", "format": "TTG1", "duration_s": exp.duration_s})
        elif fmt == "csv":
            path = out.out / "tags.csv"
            write_tags_csv(path, [s1, s2])
            text = path.read_text()
            path.unlink()
            out.csv("tags.csv", text)
        else:
            raise ConfigError("detection.tag_format must be ttg or csv")
    h = correlate(s1, s2, exp.bin_ps, exp.bins, 0.0, 0.0, exp.duration_s)
    return _analysis_outputs(out, h, exp, {"expected_true_coincidences": expected_coincidences(exp),
                                           "singles": [len(s1), len(s2)]})


def cmd_analyze(cfg, out: Outputs, files=()):
    from .photonstats import TimeTagStream, correlate, read_tags_csv, read_ttg

    exp = _experiment(cfg)
    files = list(files) or list(cfg["detection"]["inputs"] or [])
    if not files:
        raise ConfigError("analyze needs at least one tag file")
    times = {1: [], 2: []}
    duration = 0.0
    for fp in files:
        fp = Path(fp)
        if not fp.exists():
            raise ConfigError(f"no such tag file: {fp}")
        try:
            streams, dur = (read_tags_csv if fp.suffix.lower() == ".csv" else read_ttg)(fp)
        except ParseError as exc:
            raise ParseError(f"{fp}: {exc} (byte offset {exc.offset})", exc.offset) from exc
        duration = max(duration, dur)
        for ch in (1, 2):
            if ch in streams:
                times[ch].append(streams[ch].times)
    s = [TimeTagStream(ch, np.sort(np.concatenate(times[ch])) if times[ch] else np.empty(0, np.int64), duration)
         for ch in (1, 2)]
    h = correlate(s[0], s[1], exp.bin_ps, exp.bins, 0.0, 0.0, duration)
    return _analysis_outputs(out, h, exp, {"inputs": [str(f) for f in files], "singles": [len(s[0]), len(s[1])]})


# -- entry point ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="YAML run configuration")
    common.add_argument("--out", help="output directory (default: output.dir)")
    common.add_argument("--seed", type=int, help="unsigned 64-bit seed")
    common.add_argument("--threads", type=int, help="cap on worker threads/processes")
    common.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help=f"override a config value; sections: {', '.join(SECTIONS)}")
    p = _Parser(prog="nanopairs", description="Photon-pair nanoantenna simulation pipeline.")
    p.add_argument("--version", action="version", version=f"nanopairs {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("spectrum", parents=[common], help="scattering spectrum and resonance fits")
    sub.add_parser("sfg", parents=[common], help="SFG polarization map and BFP images")
    sub.add_parser("spdc", parents=[common], help="pair-rate prediction")
    sub.add_parser("coincidence", parents=[common], help="simulate and analyse a coincidence run")
    an = sub.add_parser("analyze", parents=[common], help="analyse time-tag files")
    an.add_argument("files", nargs="*", help="TTG1 (.ttg) or CSV (.csv) time-tag files")
    return p


def run(argv=None) -> dict:
    """Parse, execute and return {'command', 'result', 'written'}; raises on failure."""
    args = build_parser().parse_args(argv)
    cfg = resolve(args.config, args.set, args.seed)
    if args.threads is not None and args.threads < 1:
        raise ConfigError("--threads must be >= 1")
    set_threads(args.threads)
    out = Outputs(Path(args.out or cfg["output"]["dir"]), cfg, args.command)
    if args.command == "spectrum":
        res = cmd_spectrum(cfg, out, args.threads or 1)
    elif args.command == "sfg":
        res = cmd_sfg(cfg, out)
    elif args.command == "spdc":
        res = cmd_spdc(cfg, out)
    elif args.command == "coincidence":
        res = cmd_coincidence(cfg, out)
    else:
        res = cmd_analyze(cfg, out, args.files)
    return {"command": args.command, "result": res, "written": out.written}


def main(argv=None) -> int:
    try:
        info = run(argv)
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except (ConvergenceError, FitError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"nanopairs: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConfigError, ParseError, ValueError, TypeError, KeyError) as exc:
        print(f"nanopairs: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    for path in info["written"]:
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
