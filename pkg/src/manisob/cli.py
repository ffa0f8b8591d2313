"""Reproducible experiment runner over the geometry and norm modules.

One JSON config file drives every subcommand; command-line flags override
individual fields. Reports are emitted as JSON with sorted keys plus
plot-ready CSV tables, and every report embeds the config hash and the
trivialization manifest ids, so identical (config, seed) runs produce
byte-identical files.

Exit codes: 0 success, 1 acceptance-check failure, 2 config error,
3 numerical-guard error.
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import json
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import __version__
from ._errors import ConfigError, ManisobError
from .atlas import (admissibility_report, build_fermi_trivialization,
                    build_geodesic_trivialization, coverage_check,
                    make_corrupted_trivialization)
from .geometry import make_manifold, make_pair
from .spaces import (equivalence_experiment, extend, function_family,
                     localized_norm, trace, write_equivalence_csv)
from .symmetry import (build_weight, lift_trivialization, make_group_action,
                       weighted_periodic_norm)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_GUARD = 3

DEFAULT_CONFIG = {
    "manifold": {"preset": "flat-torus", "params": {}},
    "pair": {"preset": "sphere2", "params": {}, "submanifold": "default"},
    "seed": 0,
    "res": 96,
    "tolerance": 1e-6,
    "out": "reports",
    "radii": {"geodesic": None, "fermi": None},
    "family": {"count": 10, "kind": "smooth", "freq_max": 2.0},
    "space": {"space": "H", "s": [0.0, 1.0], "p": [2.0], "q": None},
    "norm": {"kinds": ["geodesic"]},
    "equiv": {"t1": "geodesic", "t2": "geodesic", "seed2": None,
              "s": 1.0, "p": 2.0, "max_spread": 10.0},
    "trace": {"res": 384, "points": 1000, "count": 10, "extension": True,
              "extension_modes": 3},
    "admissibility": {"kind": "fermi", "orders": 3, "samples": 4,
                      "max_charts": 12, "corrupted": False},
    "symmetry": {"h_budget": 48, "decay": 2.0, "s": [0.0, 1.0], "p": 2.0,
                 "count": 10, "res": 96, "max_spread": 10.0,
                 "doubling_tol": 1e-2},
}


def _merge(base, override, path="config"):
    """Recursive dict merge; overriding a section with a non-dict is a
    config error, unknown keys are rejected to catch typos."""
    out = copy.deepcopy(base)
    for key, val in override.items():
        if key not in base:
            raise ConfigError(f"unknown {path} field {key!r}")
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise ConfigError(f"{path}.{key} must be an object")
            out[key] = _merge(base[key], val, f"{path}.{key}")
        else:
            out[key] = copy.deepcopy(val)
    return out


def _require(cond, msg):
    if not cond:
        raise ConfigError(msg)


@dataclass
class ExperimentConfig:
    """Validated experiment description; round-trips through to_dict."""

    data: dict

    @classmethod
    def from_dict(cls, raw):
        if not isinstance(raw, dict):
            raise ConfigError("config root must be a JSON object")
        data = _merge(DEFAULT_CONFIG, raw)
        _require(isinstance(data["manifold"]["preset"], str)
                 and data["manifold"]["preset"],
                 "manifold.preset must be a nonempty string")
        _require(isinstance(data["pair"]["preset"], str)
                 and data["pair"]["preset"],
                 "pair.preset must be a nonempty string")
        _require(int(data["res"]) >= 8 and int(data["res"]) % 2 == 0,
                 "res must be even and at least 8")
        _require(float(data["tolerance"]) > 0, "tolerance must be positive")
        _require(int(data["family"]["count"]) >= 1,
                 "family.count must be at least 1")
        sp = data["space"]
        _require(sp["space"] in ("H", "F", "B"),
                 "space.space must be one of H, F, B")
        _require(len(sp["s"]) >= 1 and len(sp["p"]) >= 1,
                 "space.s and space.p must be nonempty lists")
        _require(data["equiv"]["t1"] in ("geodesic", "fermi"),
                 "equiv.t1 must be geodesic or fermi")
        _require(data["equiv"]["t2"] in ("geodesic", "fermi", "same"),
                 "equiv.t2 must be geodesic, fermi or same")
        _require(data["admissibility"]["kind"] in ("geodesic", "fermi"),
                 "admissibility.kind must be geodesic or fermi")
        _require(1 <= int(data["admissibility"]["orders"]) <= 4,
                 "admissibility.orders must be between 1 and 4")
        _require(int(data["symmetry"]["h_budget"]) >= 1,
                 "symmetry.h_budget must be at least 1")
        _require(float(data["symmetry"]["decay"]) > 0,
                 "symmetry.decay must be positive")
        _require(int(data["trace"]["points"]) >= 1,
                 "trace.points must be at least 1")
        return cls(data=data)

    def to_dict(self):
        return copy.deepcopy(self.data)

    def __getitem__(self, key):
        return self.data[key]

    @property
    def sha256(self):
        # the output directory is delivery plumbing, not part of the
        # experiment's identity
        payload = {k: v for k, v in self.data.items() if k != "out"}
        blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def load_config(path=None, overrides=None):
    raw = {}
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                raw = json.load(fh)
        except OSError as e:
            raise ConfigError(f"cannot read config {path!r}: {e}")
        except json.JSONDecodeError as e:
            raise ConfigError(f"config {path!r} is not valid JSON: {e}")
    for key, val in (overrides or {}).items():
        if val is not None:
            raw[key] = val
    return ExperimentConfig.from_dict(raw)


# -- report plumbing -----------------------------------------------------------


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True, indent=1)
        fh.write("\n")
    return path


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh)
        wr.writerow(header)
        for row in rows:
            wr.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return path


def _outdir(cfg):
    out = cfg["out"]
    os.makedirs(out, exist_ok=True)
    return out


# -- builders ------------------------------------------------------------------


def _build_manifold(cfg):
    mc = cfg["manifold"]
    return make_manifold(mc["preset"], **mc["params"])


def _build_pair(cfg):
    pc = cfg["pair"]
    return make_pair(pc["preset"], sub_name=pc["submanifold"],
                     m_params=pc["params"])


def _build_triv(cfg, kind, seed=None, pair=None):
    seed = cfg["seed"] if seed is None else seed
    if kind == "geodesic":
        m = pair[0] if pair is not None else _build_manifold(cfg)
        return build_geodesic_trivialization(
            m, r=cfg["radii"]["geodesic"], seed=int(seed))
    m, sub = pair if pair is not None else _build_pair(cfg)
    return build_fermi_trivialization(
        m, sub, R=cfg["radii"]["fermi"], seed=int(seed))


def _family(cfg, m, count=None, kind=None, seed=None):
    fc = cfg["family"]
    return function_family(
        m, count=int(count if count is not None else fc["count"]),
        seed=int(seed if seed is not None else cfg["seed"]),
        kind=kind if kind is not None else fc["kind"],
        freq_max=float(fc["freq_max"]))


# -- subcommands ---------------------------------------------------------------


def cmd_norm(cfg):
    """Localized norms for each (function, s, p, trivialization kind)."""
    out = _outdir(cfg)
    kinds = cfg["norm"]["kinds"]
    for kind in kinds:
        _require(kind in ("geodesic", "fermi"),
                 "norm.kinds entries must be geodesic or fermi")
    pair = _build_pair(cfg) if "fermi" in kinds else None
    m = pair[0] if pair is not None else _build_manifold(cfg)
    fns = _family(cfg, m)
    sp = cfg["space"]
    reports = []
    rows = []
    for kind in kinds:
        triv = _build_triv(cfg, kind, pair=pair)
        for s in sp["s"]:
            for p in sp["p"]:
                for f in fns:
                    rep = localized_norm(f, triv, space=sp["space"],
                                         s=float(s), p=float(p),
                                         q=sp["q"], res=int(cfg["res"]))
                    d = rep.to_dict()
                    d["function_id"] = f.function_id
                    d["kind"] = kind
                    d["config_sha256"] = cfg.sha256
                    reports.append(d)
                    rows.append([f.function_id, sp["space"], float(s),
                                 float(p), kind, triv.uid, rep.value])
    payload = {"command": "norm", "config_sha256": cfg.sha256,
               "version": __version__, "reports": reports}
    files = [_write_json(os.path.join(out, "norm.json"), payload),
             _write_csv(os.path.join(out, "norm.csv"),
                        ["function_id", "space", "s", "p", "kind",
                         "trivialization", "value"], rows)]
    return EXIT_OK, files


def cmd_equiv(cfg):
    """Norm ratios across two trivializations of the same manifold."""
    out = _outdir(cfg)
    ec = cfg["equiv"]
    need_pair = "fermi" in (ec["t1"], ec["t2"])
    pair = _build_pair(cfg) if need_pair else None
    m = pair[0] if pair is not None else _build_manifold(cfg)
    t1 = _build_triv(cfg, ec["t1"], pair=pair)
    if ec["t2"] == "same":
        t2 = t1
    else:
        seed2 = ec["seed2"]
        if seed2 is None:
            seed2 = int(cfg["seed"]) + 1 if ec["t2"] == ec["t1"] \
                else int(cfg["seed"])
        t2 = _build_triv(cfg, ec["t2"], seed=seed2, pair=pair)
    fns = _family(cfg, m)
    sp = cfg["space"]
    report = equivalence_experiment(
        fns, t1, t2, s=float(ec["s"]), p=float(ec["p"]),
        space=sp["space"], q=sp["q"], res=int(cfg["res"]))
    report["command"] = "equiv"
    report["config_sha256"] = cfg.sha256
    report["max_spread_allowed"] = float(ec["max_spread"])
    ok = report["spread"] < float(ec["max_spread"])
    report["flag"] = "pass" if ok else "fail"
    files = [_write_json(os.path.join(out, "equiv.json"), report)]
    csv_path = os.path.join(out, "equiv.csv")
    write_equivalence_csv(csv_path, report)
    files.append(csv_path)
    return (EXIT_OK if ok else EXIT_CHECK_FAILED), files


def cmd_trace(cfg):
    """Trace-equals-restriction check, plus the round trip through the
    extension when enabled."""
    out = _outdir(cfg)
    tc = cfg["trace"]
    m, sub = _build_pair(cfg)
    triv = _build_triv(cfg, "fermi", pair=(m, sub))
    tol = float(cfg["tolerance"])
    rng = np.random.default_rng(int(cfg["seed"]) + 1)
    lo, hi = sub.arc_window()
    s_pts = rng.uniform(lo, hi, int(tc["points"]))
    P = sub.point_at(s_pts)

    rows = []
    per_function = []
    worst = 0.0
    fns = _family(cfg, m, count=tc["count"], kind="smooth")
    for f in fns:
        tf = trace(f, triv, res=int(tc["res"]))
        err = float(np.max(np.abs(tf(s_pts[:, None]) - f(P))))
        worst = max(worst, err)
        per_function.append({"function_id": f.function_id, "sup_error": err})
        rows.append([f.function_id, "trace", err, tol, err < tol])

    roundtrip = []
    worst_rt = 0.0
    if tc["extension"]:
        ind = triv.induced_on_submanifold()
        fps = function_family(ind.manifold, count=int(tc["count"]),
                              seed=int(cfg["seed"]), kind="bandlimited",
                              modes=int(tc["extension_modes"]))
        for fp in fps:
            ex = extend(fp, triv, res=int(tc["res"]))
            tr = trace(ex, triv, res=int(tc["res"]))
            ref = fp(s_pts[:, None])
            diff = tr(s_pts[:, None]) - ref
            denom = float(np.sqrt(np.mean(np.abs(ref) ** 2)))
            rel = float(np.sqrt(np.mean(np.abs(diff) ** 2))
                        / max(denom, 1e-300))
            worst_rt = max(worst_rt, rel)
            roundtrip.append({"function_id": fp.function_id,
                              "rel_l2_error": rel})
            rows.append([fp.function_id, "roundtrip", rel, tol, rel < tol])

    ok = worst < tol and (not tc["extension"] or worst_rt < tol)
    payload = {"command": "trace", "config_sha256": cfg.sha256,
               "trivialization": triv.uid, "res": int(tc["res"]),
               "points": int(tc["points"]), "tolerance": tol,
               "per_function": per_function, "sup_error": worst,
               "roundtrip": roundtrip, "roundtrip_rel_l2": worst_rt,
               "flag": "pass" if ok else "fail"}
    files = [_write_json(os.path.join(out, "trace.json"), payload),
             _write_csv(os.path.join(out, "trace.csv"),
                        ["function_id", "stage", "error", "tolerance",
                         "pass"], rows)]
    return (EXIT_OK if ok else EXIT_CHECK_FAILED), files


def cmd_admissibility(cfg):
    """Derivative-bound diagnostics for a trivialization, with an optional
    corrupted negative control."""
    out = _outdir(cfg)
    ac = cfg["admissibility"]
    pair = _build_pair(cfg) if ac["kind"] == "fermi" else None
    triv = _build_triv(cfg, ac["kind"], pair=pair)
    if ac["corrupted"]:
        triv = make_corrupted_trivialization(triv)
    rep = admissibility_report(triv, max_order=int(ac["orders"]),
                               samples=int(ac["samples"]),
                               max_charts=int(ac["max_charts"]),
                               seed=int(cfg["seed"]))
    cov = coverage_check(triv, seed=int(cfg["seed"]))
    ok = bool(rep["all_finite"] and rep["all_stable"])
    payload = {"command": "admissibility", "config_sha256": cfg.sha256,
               "trivialization": triv.uid, "kind": ac["kind"],
               "corrupted": bool(ac["corrupted"]),
               "report": rep, "coverage": cov,
               "flag": "pass" if ok else "fail"}
    rows = []
    for e in rep["transitions"]:
        for k, o in e["orders"].items():
            rows.append(["transition:" + "|".join(e["pair"]), int(k),
                         o["max_abs"], o["max_abs_half_step"] /
                         max(o["max_abs"], 1e-300), o["stable"]])
    for e in rep["cutoffs"]:
        for k, o in e["orders"].items():
            rows.append(["cutoff:" + e["chart"], int(k), o["max_abs"],
                         o["refine_ratio"], o["stable"]])
    files = [_write_json(os.path.join(out, "admissibility.json"), payload),
             _write_csv(os.path.join(out, "admissibility.csv"),
                        ["entry", "order", "max_abs", "ratio", "stable"],
                        rows)]
    return (EXIT_OK if ok else EXIT_CHECK_FAILED), files


def cmd_symmetry(cfg):
    """Weighted periodic norms on the lattice cover of the flat torus
    against plain quotient norms, with a budget-doubling stability check."""
    out = _outdir(cfg)
    sc = cfg["symmetry"]
    quot = make_manifold("flat-torus", n=1)
    qt = build_geodesic_trivialization(quot, seed=int(cfg["seed"]))
    ga = make_group_action(1)
    lifted = lift_trivialization(qt, ga, h_budget=int(sc["h_budget"]))
    lifted2 = lift_trivialization(qt, ga, h_budget=2 * int(sc["h_budget"]))
    w = build_weight(lifted, decay=float(sc["decay"]))
    w2 = build_weight(lifted2, decay=float(sc["decay"]))
    fns = function_family(quot, count=int(sc["count"]),
                          seed=int(cfg["seed"]), kind="bandlimited")
    rows = []
    results = []
    spread_worst = 1.0
    change_worst = 0.0
    for s in sc["s"]:
        ratios = []
        for f in fns:
            rw = weighted_periodic_norm(f, w, lifted, s=float(s),
                                        p=float(sc["p"]), res=int(sc["res"]))
            rq = localized_norm(f, qt, space="H", s=float(s),
                                p=float(sc["p"]), res=int(sc["res"]))
            rw2 = weighted_periodic_norm(f, w2, lifted2, s=float(s),
                                         p=float(sc["p"]),
                                         res=int(sc["res"]))
            ratio = rw.value / rq.value if rq.value else 1.0
            change = abs(rw2.value - rw.value) / rw.value if rw.value else 0.0
            ratios.append(ratio)
            change_worst = max(change_worst, change)
            rows.append([f.function_id, float(s), rw.value, rq.value,
                         ratio, change])
            results.append({"function_id": f.function_id, "s": float(s),
                            "weighted": rw.value, "quotient": rq.value,
                            "ratio": ratio, "doubling_change": change,
                            "tail_rel": rw.meta["truncation_tail_rel"]})
        spread_worst = max(spread_worst, max(ratios) / min(ratios))
    ok = (spread_worst < float(sc["max_spread"])
          and change_worst < float(sc["doubling_tol"]))
    payload = {"command": "symmetry", "config_sha256": cfg.sha256,
               "quotient_trivialization": qt.uid,
               "lifted_trivialization": lifted.uid,
               "h_budget": int(sc["h_budget"]),
               "decay": float(sc["decay"]),
               "results": results, "spread": spread_worst,
               "doubling_change": change_worst,
               "flag": "pass" if ok else "fail"}
    files = [_write_json(os.path.join(out, "symmetry.json"), payload),
             _write_csv(os.path.join(out, "symmetry.csv"),
                        ["function_id", "s", "weighted", "quotient",
                         "ratio", "doubling_change"], rows)]
    return (EXIT_OK if ok else EXIT_CHECK_FAILED), files


_COMMANDS = {
    "norm": cmd_norm,
    "equiv": cmd_equiv,
    "trace": cmd_trace,
    "admissibility": cmd_admissibility,
    "symmetry": cmd_symmetry,
}


def cmd_all(cfg):
    codes = {}
    files = []
    for name in ("norm", "equiv", "trace", "admissibility", "symmetry"):
        code, out_files = _COMMANDS[name](cfg)
        codes[name] = code
        files.extend(out_files)
    summary = {"command": "all", "config_sha256": cfg.sha256,
               "exit_codes": codes,
               "flag": "pass" if all(c == 0 for c in codes.values())
               else "fail"}
    files.append(_write_json(os.path.join(_outdir(cfg), "summary.json"),
                             summary))
    worst = EXIT_OK
    for c in codes.values():
        if c != EXIT_OK:
            worst = c if worst == EXIT_OK else min(worst, c)
    return worst, files


def _build_parser():
    ap = argparse.ArgumentParser(
        prog="manisob",
        description="Chart-localized Sobolev norm experiments on model "
                    "manifolds.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_text in [
            ("norm", "localized norms over a function family"),
            ("equiv", "norm ratios across two trivializations"),
            ("trace", "trace / extension consistency checks"),
            ("admissibility", "derivative-bound diagnostics"),
            ("symmetry", "weighted periodic norm experiments"),
            ("all", "run every experiment")]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument("--seed", type=int, default=None,
                       help="override the master seed")
        p.add_argument("--res", type=int, default=None,
                       help="override the grid resolution")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--tolerance", type=float, default=None,
                       help="override the acceptance tolerance")
    return ap


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, {
            "seed": args.seed, "res": args.res, "out": args.out,
            "tolerance": args.tolerance})
        fn = cmd_all if args.command == "all" else _COMMANDS[args.command]
        code, files = fn(cfg)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except ManisobError as e:
        code_name = getattr(e, "code", "numerical-guard")
        print(f"numerical guard ({code_name}): {e}", file=sys.stderr)
        return EXIT_GUARD
    for path in files:
        print(path)
    return code


if __name__ == "__main__":
    sys.exit(main())
