"""Experiment harness: TOML configs in, CSV/JSON report rows out.

Usage::

    geobeam <experiment> --config run.toml [--out rows.csv] [--format csv|json] [--seed N]

Exit codes: 0 success, 1 config error, 2 infeasible experiment, 3 I/O error.
Errors are reported on stderr as a single JSON line ``{"error": kind, "reason": ...}``.

Seeds.  The master seed expands into component seeds by splitmix64: the
component with stream index i gets the (i+1)-th output of a splitmix64
generator started at the master seed, shifted right by 11 bits so that it is
exactly representable as a double (streams: 0 dictionary, 1 geodesics,
2 samples).  An explicit ``dictionary_seed`` overrides stream 0.  The seeds
used are emitted as ``seed:*`` rows at the top of every report.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Optional, Sequence

import numpy as np
import tomli
import tomli_w

from .geom import (
    apply_isometry,
    block_rotation,
    canonical_form,
    geodesic_from_frame,
    random_geodesic,
    random_rotation,
    standard_geodesic,
)
from .groups import (
    FiniteGroup,
    StandardGroupSpec,
    conjugate_group,
    group_from_elements,
    invariant_dimension,
    is_cyclic,
    is_fixed_point_free,
    make_group,
    stabilizer,
)
from .harmonics import (
    ANALYTIC_DEGREE_CAP,
    DEGREE_CAP,
    beam,
    certify_overlap_formula,
    compose_isometry,
    coset_average,
    evaluate,
    group_average,
    harmonicity_defect,
    inner_product,
    sums_equal,
)
from .measures import (
    Dictionary,
    GeodesicMeasure,
    HusimiField,
    average_measure,
    default_grid,
    husimi,
    mutually_singular,
    pushforward,
    realize_measure,
    weak_star_discrepancy,
)

EXPERIMENTS = ("beam-converge", "average", "realize", "lens-spectrum", "verify")
HEADER = ["experiment", "d", "p", "l", "k", "observable", "value", "reference", "abs_error"]
FRAME_WARN_TOL = 1e-8
MASK64 = (1 << 64) - 1

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_IO = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


class InfeasibleError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# seeds
# ---------------------------------------------------------------------------

def splitmix64(state: int):
    """One splitmix64 step: returns (new_state, output)."""
    state = (state + 0x9E3779B97F4A7C15) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return state, z ^ (z >> 31)


def derive_seeds(master: int, n: int = 3) -> list[int]:
    state = master & MASK64
    out = []
    for _ in range(n):
        state, z = splitmix64(state)
        out.append(z >> 11)
    return out


# ---------------------------------------------------------------------------
# config
# ---------------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    experiment: str
    d: int = 3
    group: str = "standard"          # "standard" or "trivial"
    p: int = 1
    l: list = field(default_factory=list)
    geodesics: list = field(default_factory=lambda: ["gamma:1"])
    frames: list = field(default_factory=list)
    weights: list = field(default_factory=list)
    degrees: list = field(default_factory=lambda: [8, 16, 32, 64])
    seed: int = 0
    dictionary_seed: Optional[int] = None
    resolution: int = 64
    out: Optional[str] = None
    format: str = "csv"

    # -- derived -----------------------------------------------------------
    @property
    def n(self) -> int:
        return (self.d + 1) // 2

    @property
    def l_tuple(self) -> tuple:
        if self.group == "trivial":
            return (1,) * self.n
        return tuple(self.l) if self.l else (1,) * self.n

    @property
    def p_value(self) -> int:
        return 1 if self.group == "trivial" else self.p

    @property
    def seeds(self) -> dict:
        dic, geo, samp = derive_seeds(self.seed)
        if self.dictionary_seed is not None:
            dic = self.dictionary_seed
        return {"master": self.seed, "dictionary": dic, "geodesics": geo, "samples": samp}

    def validate(self) -> "ExperimentConfig":
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if not isinstance(self.d, int) or self.d < 3 or self.d % 2 == 0:
            raise ConfigError(f"d must be an odd integer >= 3, got {self.d!r}")
        if self.group not in ("standard", "trivial"):
            raise ConfigError(f"group must be 'standard' or 'trivial', got {self.group!r}")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"format must be csv or json, got {self.format!r}")
        if len(self.l_tuple) != self.n:
            raise ConfigError(f"l needs {self.n} entries for d={self.d}")
        try:
            StandardGroupSpec(self.p_value, self.l_tuple).check_coprime()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        cap = ANALYTIC_DEGREE_CAP if self.experiment in ("average", "lens-spectrum") else DEGREE_CAP
        for k in self.degrees:
            if not isinstance(k, int) or k < 0 or k > cap:
                raise ConfigError(f"degree {k!r} outside [0, {cap}]")
        if self.experiment in ("beam-converge", "realize") and self.d != 3:
            raise ConfigError("geodesic-space quadrature only for d=3")
        if self.weights and len(self.weights) != len(self.geodesics) + len(self.frames):
            raise ConfigError("weights must match the number of geodesics")
        if not isinstance(self.resolution, int) or self.resolution < 4:
            raise ConfigError("resolution must be an integer >= 4")
        for g in self.geodesics:
            if not (g == "random" or (isinstance(g, str) and g.startswith("gamma:"))):
                raise ConfigError(f"bad geodesic spec {g!r}")
        return self

    # -- serialization -----------------------------------------------------
    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}

    def to_toml(self) -> str:
        return tomli_w.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        if "experiment" not in data:
            raise ConfigError("missing key 'experiment'")
        data = dict(data)
        if data.get("l") == "trivial":
            data["group"] = "trivial"
            del data["l"]
        return cls(**data)

    @classmethod
    def from_toml(cls, text: str) -> "ExperimentConfig":
        try:
            return cls.from_dict(tomli.loads(text))
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(f"invalid TOML: {exc}") from None
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


# ---------------------------------------------------------------------------
# rows
# ---------------------------------------------------------------------------

@dataclass
class ReportRow:
    experiment: str
    d: int
    p: int
    l: tuple
    k: Optional[int]
    observable: str
    value: float
    reference: Optional[float] = None

    @property
    def abs_error(self) -> Optional[float]:
        if self.reference is None:
            return None
        return abs(self.value - self.reference)

    def as_record(self) -> dict:
        return {
            "experiment": self.experiment, "d": self.d, "p": self.p,
            "l": "-".join(str(x) for x in self.l), "k": self.k,
            "observable": self.observable, "value": float(self.value),
            "reference": None if self.reference is None else float(self.reference),
            "abs_error": self.abs_error,
        }


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def format_rows(rows: Sequence[ReportRow], fmt: str) -> str:
    records = [r.as_record() for r in rows]
    if fmt == "json":
        return json.dumps(records, indent=1) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HEADER)
    for rec in records:
        w.writerow([_fmt(rec[h]) for h in HEADER])
    return buf.getvalue()


def emit(rows: Sequence[ReportRow], fmt: str = "csv", path: Optional[str] = None) -> str:
    """Write rows to ``path`` (stdout when None); returns the text written."""
    text = format_rows(rows, fmt)
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text


def parse_report(text: str, fmt: str = "csv") -> list[dict]:
    """Inverse of :func:`format_rows` up to record form."""
    if fmt == "json":
        return json.loads(text)
    out = []
    for rec in csv.DictReader(io.StringIO(text)):
        row = {"experiment": rec["experiment"], "d": int(rec["d"]), "p": int(rec["p"]),
               "l": rec["l"], "k": int(rec["k"]) if rec["k"] else None,
               "observable": rec["observable"], "value": float(rec["value"])}
        for key in ("reference", "abs_error"):
            row[key] = float(rec[key]) if rec[key] else None
        out.append(row)
    return out


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------

class _Context:
    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.seeds = cfg.seeds
        self.G = make_group(StandardGroupSpec(cfg.p_value, cfg.l_tuple), cfg.d)
        self.rows: list[ReportRow] = []
        for name in ("master", "dictionary", "geodesics", "samples"):
            self.add(None, f"seed:{name}", float(self.seeds[name]))

    def add(self, k, observable, value, reference=None):
        c = self.cfg
        self.rows.append(ReportRow(c.experiment, c.d, c.p_value, c.l_tuple, k, observable,
                                   float(value), None if reference is None else float(reference)))

    def geodesics(self):
        c = self.cfg
        out = []
        for i, spec in enumerate(c.geodesics):
            if spec == "random":
                rng = np.random.default_rng([self.seeds["geodesics"], i])
                out.append(random_geodesic(c.d, rng))
            else:
                try:
                    out.append(standard_geodesic(int(spec.split(":", 1)[1]), c.d))
                except ValueError as exc:
                    raise ConfigError(f"bad geodesic spec {spec!r}: {exc}") from None
        for i, pair in enumerate(c.frames):
            try:
                u, v = (np.asarray(x, dtype=np.float64) for x in pair)
                gamma = geodesic_from_frame(u, v)
            except ValueError as exc:
                raise ConfigError(f"frame {i}: {exc}") from None
            if u.shape != (c.d + 1,):
                raise ConfigError(f"frame {i} has wrong length")
            adjust = max(np.max(np.abs(gamma.u - u)), np.max(np.abs(gamma.v - v)))
            if adjust > FRAME_WARN_TOL:
                self.add(None, f"warning:frame_{i}_orthonormalized", adjust)
            out.append(gamma)
        if not out:
            raise ConfigError("no geodesics given")
        return out

    def target(self) -> GeodesicMeasure:
        atoms = self.geodesics()
        w = self.cfg.weights or [1.0] * len(atoms)
        w = np.asarray(w, dtype=np.float64)
        if np.any(w <= 0):
            raise ConfigError("weights must be positive")
        return GeodesicMeasure.combination(atoms, w / w.sum())

    def dictionary(self) -> Dictionary:
        return Dictionary.default(seed=self.seeds["dictionary"])

    def grid(self):
        return default_grid(self.cfg.resolution, self.cfg.resolution)


def _realize(ctx, target, k):
    try:
        return realize_measure(target, ctx.G, k)
    except ValueError as exc:
        raise InfeasibleError(str(exc)) from None


def _run_beam_converge(ctx: _Context):
    target = ctx.target()
    limit = average_measure(target, ctx.G)
    dic = ctx.dictionary()
    for k in ctx.cfg.degrees:
        psi = _realize(ctx, target, k)
        field_ = HusimiField.build(psi, ctx.grid())
        ctx.add(k, "weak_star_discrepancy", weak_star_discrepancy(field_, limit, dic), 0.0)


def _run_average(ctx: _Context):
    gamma = ctx.geodesics()[0]
    G = ctx.G
    stab = stabilizer(G, gamma).order
    rng = np.random.default_rng(ctx.seeds["samples"])
    x = rng.standard_normal((200, ctx.cfg.d + 1))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    for k in ctx.cfg.degrees:
        avg = group_average(beam(gamma, k), G)
        ref = stab / G.order if k % stab == 0 else 0.0
        ctx.add(k, "avg_norm_sq", inner_product(avg, avg).real, ref)
        base = evaluate(avg, x) if len(avg) else np.zeros(len(x))
        resid = 0.0
        for g in G.elements:
            moved = evaluate(avg, x @ g.T) if len(avg) else np.zeros(len(x))
            resid = max(resid, float(np.max(np.abs(moved - base))))
        ctx.add(k, "invariance_residual", resid, 0.0)


def _run_realize(ctx: _Context):
    target = ctx.target()
    limit = average_measure(target, ctx.G)
    dic = ctx.dictionary()
    for k in ctx.cfg.degrees:
        psi = _realize(ctx, target, k)
        field_ = HusimiField.build(psi, ctx.grid())
        masses = field_.masses(limit.atoms)
        for i, (m, w) in enumerate(zip(masses, limit.weights)):
            ctx.add(k, f"mass_atom_{i}", m, w)
        ctx.add(k, "weak_star_discrepancy", weak_star_discrepancy(field_, limit, dic), 0.0)


def _run_lens_spectrum(ctx: _Context):
    plain = group_from_elements(ctx.G.elements)   # no spec: forces the trace formula
    for k in ctx.cfg.degrees:
        ctx.add(k, "invariant_dimension", invariant_dimension(ctx.G, k),
                invariant_dimension(plain, k))


# -- invariant suite --------------------------------------------------------

def _check_canonical(d, rng):
    worst = 0.0
    for _ in range(50):
        phi = random_rotation(d + 1, rng)
        cf = canonical_form(phi)
        worst = max(worst, np.linalg.norm(cf.conjugator @ cf.block() @ cf.conjugator.T - phi))
    return worst, 1e-10


def _check_action(d, rng):
    worst = 0.0
    for _ in range(20):
        a, b = random_rotation(d + 1, rng), random_rotation(d + 1, rng)
        g = random_geodesic(d, rng)
        lhs = apply_isometry(a @ b, g)
        rhs = apply_isometry(a, apply_isometry(b, g))
        worst = max(worst, np.linalg.norm(lhs.bivector - rhs.bivector))
        worst = max(worst, abs(lhs.b @ lhs.b), abs(np.vdot(lhs.b, lhs.b) - 2))
    return worst, 1e-9


def _check_fixed_point_free(d, rng):
    bad = 0
    for p in range(1, 13):
        for l1 in range(1, p + 1):
            for l2 in range(1, p + 1):
                l = (l1, l2) + (1,) * ((d + 1) // 2 - 2)
                spec = StandardGroupSpec(p, l)
                coprime = all(math.gcd(x, p) == 1 for x in l)
                G = make_group_unchecked(spec, d)
                bad += coprime != is_fixed_point_free(G)
    return float(bad), 0.0


def make_group_unchecked(spec: StandardGroupSpec, d: int) -> FiniteGroup:
    """All p powers of the block rotation, skipping the coprimality check.

    When gcd(l_j, p) > 1 some power p/g with g > 1 acts as a block identity,
    so the spectral test must report a fixed point.
    """
    els = [block_rotation(2 * np.pi * ((m * np.asarray(spec.l)) % spec.p) / spec.p)
           for m in range(spec.p)]
    return FiniteGroup(np.array(els), generator=1 if spec.p > 1 else 0)


def _check_lemma_cyclic(d, rng):
    misses = 0
    n = (d + 1) // 2
    for _ in range(20):
        p = int(rng.integers(2, 9))
        l = [int(x) for x in rng.integers(1, p + 1, size=n)]
        l = [x if math.gcd(x, p) == 1 else 1 for x in l]
        phi = random_rotation(d + 1, rng)
        G = conjugate_group(make_group(StandardGroupSpec(p, tuple(l)), d), phi)
        gamma = apply_isometry(phi.T, standard_geodesic(1, d))
        misses += is_cyclic(stabilizer(G, gamma)) is None
        misses += is_cyclic(stabilizer(G, random_geodesic(d, rng))) is None
    return float(misses), 0.0


def _check_equivariance(d, rng):
    n = (d + 1) // 2
    spec = StandardGroupSpec(5, (1, 2) + (1,) * (n - 2))
    gen = make_group(spec, d).elements[1]
    x = rng.standard_normal((200, d + 1))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    g1 = standard_geodesic(1, d)
    worst = 0.0
    for k in range(0, 41, 3):
        psi = beam(g1, k)
        lhs = evaluate(compose_isometry(psi, gen), x)
        rhs = np.exp(2j * np.pi * k * spec.l[0] / spec.p) * evaluate(psi, x)
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return worst, 1e-10


def _check_averaging(d, rng):
    G = make_group(StandardGroupSpec(4, (1,) * ((d + 1) // 2)), d)
    psi = beam(random_geodesic(d, rng), 8)
    avg = group_average(psi, G)
    ok = sums_equal(group_average(avg, G), avg)
    H = stabilizer(G, standard_geodesic(1, d))
    inv = beam(standard_geodesic(1, d), 8)
    ok &= sums_equal(coset_average(inv, G, H), group_average(inv, G))
    return float(not ok), 0.0


def _check_unitarity(d, rng):
    worst = 0.0
    for _ in range(10):
        a = beam(random_geodesic(d, rng), 6) + 0.5 * beam(random_geodesic(d, rng), 6)
        b = beam(random_geodesic(d, rng), 6)
        phi = random_rotation(d + 1, rng)
        worst = max(worst, abs(inner_product(compose_isometry(a, phi), compose_isometry(b, phi))
                               - inner_product(a, b)))
    return worst, 1e-10


def _check_overlap(d, rng):
    return certify_overlap_formula(d), 1e-10


def _check_harmonic(d, rng):
    return max(harmonicity_defect(beam(random_geodesic(d, rng), 5)) for _ in range(10)), 1e-12


def _check_husimi_covariance(d, rng):
    worst = 0.0
    for _ in range(10):
        psi = beam(random_geodesic(d, rng), 10)
        phi = random_rotation(d + 1, rng)
        gamma = random_geodesic(d, rng)
        worst = max(worst, abs(husimi(compose_isometry(psi, phi), gamma)
                               - husimi(psi, apply_isometry(phi, gamma))))
    return worst, 1e-10


def _check_dichotomy(d, rng):
    fails = 0
    n = (d + 1) // 2
    for p in (2, 3, 5, 8):
        G = make_group(StandardGroupSpec(p, (1,) * n), d)
        for gamma in [standard_geodesic(1, d)] + [random_geodesic(d, rng) for _ in range(5)]:
            mu = GeodesicMeasure.delta(gamma)
            for g in G.elements:
                nu = pushforward(mu, g)
                fails += not (nu.equals(mu) or mutually_singular(mu, nu))
    return float(fails), 0.0


def _check_average_invariant(d, rng):
    G = make_group(StandardGroupSpec(6, (1,) * ((d + 1) // 2)), d)
    mu = GeodesicMeasure.combination([random_geodesic(d, rng), standard_geodesic(1, d)], [0.3, 0.7])
    avg = average_measure(mu, G)
    bad = sum(not pushforward(avg, g).equals(avg, 1e-9) for g in G.elements)
    bad += abs(avg.weights.sum() - 1) > 1e-12
    return float(bad), 0.0


INVARIANT_SUITE = {
    "canonical_form_roundtrip": _check_canonical,
    "isometry_group_action": _check_action,
    "fixed_point_free_iff_coprime": _check_fixed_point_free,
    "stabilizers_cyclic": _check_lemma_cyclic,
    "equivariance_phase": _check_equivariance,
    "averaging_idempotent": _check_averaging,
    "composition_unitary": _check_unitarity,
    "overlap_formula_certified": _check_overlap,
    "beam_harmonic": _check_harmonic,
    "husimi_covariance": _check_husimi_covariance,
    "pushforward_dichotomy": _check_dichotomy,
    "average_measure_invariant": _check_average_invariant,
}


def _run_verify(ctx: _Context):
    d = ctx.cfg.d
    failed = 0
    for i, (name, check) in enumerate(INVARIANT_SUITE.items()):
        rng = np.random.default_rng([ctx.seeds["samples"], i])
        resid, tol = check(d, rng)
        passed = bool(resid <= tol)
        failed += not passed
        ctx.add(None, f"residual:{name}", resid, 0.0)
        ctx.add(None, f"pass:{name}", 1.0 if passed else 0.0, 1.0)
    return failed


RUNNERS = {
    "beam-converge": _run_beam_converge,
    "average": _run_average,
    "realize": _run_realize,
    "lens-spectrum": _run_lens_spectrum,
    "verify": _run_verify,
}


def run(cfg: ExperimentConfig) -> list[ReportRow]:
    """Execute an experiment; raises ConfigError or InfeasibleError."""
    rows, _ = _run(cfg)
    return rows


def _run(cfg):
    cfg.validate()
    ctx = _Context(cfg)
    failed = RUNNERS[cfg.experiment](ctx)
    return ctx.rows, failed or 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _int_list(text):
    return [int(x) for x in text.replace("[", "").replace("]", "").split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="geobeam", description=__doc__.split("\n\n")[0])
    ap.add_argument("experiment", choices=EXPERIMENTS)
    ap.add_argument("--config", required=True, help="TOML config file")
    ap.add_argument("--out")
    ap.add_argument("--format", choices=("csv", "json"))
    ap.add_argument("--seed", type=int)
    ap.add_argument("--d", type=int)
    ap.add_argument("--group", choices=("standard", "trivial"))
    ap.add_argument("--p", type=int)
    ap.add_argument("--l", type=_int_list, help="comma-separated rotation numbers")
    ap.add_argument("--geodesics", type=lambda s: s.split(","), help="e.g. gamma:1,random")
    ap.add_argument("--weights", type=lambda s: [float(x) for x in s.split(",")])
    ap.add_argument("--degrees", type=_int_list, help="comma-separated degrees")
    ap.add_argument("--dictionary-seed", dest="dictionary_seed", type=int)
    ap.add_argument("--resolution", type=int)
    return ap


def _fail(kind: str, reason: str, code: int) -> int:
    sys.stderr.write(json.dumps({"error": kind, "reason": reason}) + "\n")
    return code


def load_config(path: str, overrides: Optional[dict] = None) -> ExperimentConfig:
    with open(path, "rb") as fh:
        text = fh.read().decode("utf-8")
    cfg = ExperimentConfig.from_toml(text)
    if overrides:
        cfg = replace(cfg, **{k: v for k, v in overrides.items() if v is not None})
    return cfg


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {k: v for k, v in vars(args).items() if k != "config"}
    try:
        cfg = load_config(args.config, overrides)
        rows, failed = _run(cfg)
    except OSError as exc:
        return _fail("config", f"cannot read config: {exc}", EXIT_CONFIG)
    except ConfigError as exc:
        return _fail("config", str(exc), EXIT_CONFIG)
    except InfeasibleError as exc:
        rows = [ReportRow(cfg.experiment, cfg.d, cfg.p_value, cfg.l_tuple, None,
                          f"error:{exc}", math.nan)]
        try:
            emit(rows, cfg.format, cfg.out)
        except OSError:
            pass
        return _fail("infeasible", str(exc), EXIT_INFEASIBLE)
    try:
        emit(rows, cfg.format, cfg.out)
    except OSError as exc:
        return _fail("io", str(exc), EXIT_IO)
    if cfg.experiment == "verify" and failed:
        return _fail("verify", f"{failed} invariant check(s) failed", EXIT_INFEASIBLE)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
