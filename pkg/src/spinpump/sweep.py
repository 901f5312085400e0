"""Parameter sweeps over transport regimes, with CSV and figure-data export.

Configuration files use a flat sectioned key-value format ([model], [sweep],
[outputs], [oracle]; ``key = value`` lines, ``#`` comments).  The exact
grammar, the column order of every emitted file and the determinism
guarantees are documented in the README.
"""

from __future__ import annotations

import concurrent.futures
import itertools
from dataclasses import dataclass, field

import numpy as np

from .cumulants import CumulantSet, full_cumulant_set, spin_sign_combination
from .params import RateParams

SWEEPABLE_FIELDS = ("gamma_l_up", "gamma_l_down", "gamma_r_up",
                    "gamma_r_down", "r_rf", "delta_esr", "gamma_phi")
REGIME_ORDER = ("coherent", "incoherent", "dephased")
QUANTITY_GROUPS = ("currents", "noise", "third")

#: derived columns per quantity group, in emission order
GROUP_COLUMNS = {
    "currents": ("I_s_L", "I_s_R", "I_c_L", "I_c_R"),
    "noise": ("S_s_LL", "S_s_LR", "S_s_RR"),
    "third": ("C_s_LLL", "C_s_LLR", "C_s_LRR", "C_s_RRR"),
}

_CHANNEL_SHORT = ("Lup", "Ldn", "Rup", "Rdn")


class ConfigError(ValueError):
    """Invalid configuration; ``errors`` lists line-numbered messages."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class OracleSpec:
    t_final: float
    n_trajectories: int
    seed: int
    points: tuple[float, ...]


@dataclass(frozen=True)
class SweepSpec:
    regimes: tuple[str, ...]
    fixed: RateParams
    swept: str
    grid: tuple[float, ...]
    outputs: tuple[str, ...]
    gamma_phi_values: tuple[float, ...] = ()
    raw_channels: bool = False
    oracle: OracleSpec | None = None

    def regime_blocks(self):
        """(regime label, gamma_phi override) pairs in emission order."""
        blocks = []
        for regime in self.regimes:
            if regime == "dephased":
                for value in self.gamma_phi_values:
                    blocks.append((regime, value))
            else:
                blocks.append((regime, None))
        return blocks


@dataclass
class SweepRow:
    regime: str
    gamma_phi: float
    value: float
    status: str
    cumulants: CumulantSet | None = None
    error: str = ""
    errors_se: dict = field(default_factory=dict)


@dataclass
class SweepResult:
    spec: SweepSpec
    rows: list[SweepRow]


_REQUIRED_MODEL_KEYS = ("gamma_l_up", "gamma_l_down", "gamma_r_up",
                        "gamma_r_down", "r_rf")
_OPTIONAL_MODEL_KEYS = ("delta_esr", "gamma_phi")
_SWEEP_KEYS = ("regimes", "parameter", "start", "stop", "count",
               "gamma_phi_values")
_OUTPUT_KEYS = ("quantities", "raw_channels")
_ORACLE_KEYS = ("t_final", "n_trajectories", "seed", "points")


def _parse_lines(text: str):
    """Raw (section, key, value, line_number) items plus syntax errors."""
    items = []
    errors = []
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            if section not in ("model", "sweep", "outputs", "oracle"):
                errors.append(f"line {lineno}: unknown section [{section}]")
                section = None
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: expected 'key = value', got {line!r}")
            continue
        if section is None:
            errors.append(f"line {lineno}: key outside of any section")
            continue
        key, value = (part.strip() for part in line.split("=", 1))
        items.append((section, key.lower(), value, lineno))
    return items, errors


def parse_config(text: str) -> SweepSpec:
    """Parse and validate a sweep configuration.

    Raises :class:`ConfigError` whose ``errors`` attribute holds one
    line-numbered message per problem.
    """
    items, errors = _parse_lines(text)
    sections: dict[str, dict[str, tuple[str, int]]] = {
        "model": {}, "sweep": {}, "outputs": {}, "oracle": {}}
    known = {"model": _REQUIRED_MODEL_KEYS + _OPTIONAL_MODEL_KEYS,
             "sweep": _SWEEP_KEYS, "outputs": _OUTPUT_KEYS,
             "oracle": _ORACLE_KEYS}
    for section, key, value, lineno in items:
        if key not in known[section]:
            errors.append(f"line {lineno}: unknown key {key!r} in [{section}]")
            continue
        if key in sections[section]:
            errors.append(f"line {lineno}: duplicate key {key!r} in [{section}]")
            continue
        sections[section][key] = (value, lineno)

    def take_float(section, key, default=None):
        if key not in sections[section]:
            if default is None:
                errors.append(f"missing required key {key!r} in [{section}]")
            return default
        value, lineno = sections[section][key]
        try:
            return float(value)
        except ValueError:
            errors.append(f"line {lineno}: non-numeric value for {key!r}: {value!r}")
            return default

    def take_int(section, key, default=None):
        if key not in sections[section]:
            if default is None:
                errors.append(f"missing required key {key!r} in [{section}]")
            return default
        value, lineno = sections[section][key]
        try:
            return int(value)
        except ValueError:
            errors.append(f"line {lineno}: non-integer value for {key!r}: {value!r}")
            return default

    model_values = {key: take_float("model", key) for key in _REQUIRED_MODEL_KEYS}
    model_values["delta_esr"] = take_float("model", "delta_esr", 0.0)
    model_values["gamma_phi"] = take_float("model", "gamma_phi", 0.0)

    regimes: tuple[str, ...] = ()
    if "regimes" not in sections["sweep"]:
        errors.append("missing required key 'regimes' in [sweep]")
    else:
        value, lineno = sections["sweep"]["regimes"]
        raw = tuple(tok.strip().lower() for tok in value.split(",") if tok.strip())
        bad = [tok for tok in raw if tok not in REGIME_ORDER]
        for tok in bad:
            errors.append(f"line {lineno}: unknown regime {tok!r}")
        seen = []
        for tok in raw:
            if tok in REGIME_ORDER and tok not in seen:
                seen.append(tok)
        regimes = tuple(seen)
        if not regimes and not bad:
            errors.append(f"line {lineno}: no regimes given")

    swept = ""
    if "parameter" not in sections["sweep"]:
        errors.append("missing required key 'parameter' in [sweep]")
    else:
        value, lineno = sections["sweep"]["parameter"]
        swept = value.strip()
        if swept not in SWEEPABLE_FIELDS:
            errors.append(
                f"line {lineno}: swept parameter must be one of "
                f"{', '.join(SWEEPABLE_FIELDS)}; got {swept!r}")

    start = take_float("sweep", "start")
    stop = take_float("sweep", "stop")
    count = take_int("sweep", "count")
    if count is not None and count < 2:
        _, lineno = sections["sweep"]["count"]
        errors.append(f"line {lineno}: grid count must be >= 2, got {count}")

    gamma_phi_values: tuple[float, ...] = ()
    if "gamma_phi_values" in sections["sweep"]:
        value, lineno = sections["sweep"]["gamma_phi_values"]
        try:
            gamma_phi_values = tuple(float(tok) for tok in value.split(","))
        except ValueError:
            errors.append(f"line {lineno}: non-numeric gamma_phi_values: {value!r}")
    if "dephased" in regimes and not gamma_phi_values:
        errors.append("regime 'dephased' requires gamma_phi_values in [sweep]")

    outputs: tuple[str, ...] = QUANTITY_GROUPS
    if "quantities" in sections["outputs"]:
        value, lineno = sections["outputs"]["quantities"]
        tokens = tuple(tok.strip().lower() for tok in value.split(",") if tok.strip())
        bad = [tok for tok in tokens if tok not in QUANTITY_GROUPS + ("all",)]
        for tok in bad:
            errors.append(f"line {lineno}: unknown quantity group {tok!r}")
        if "all" in tokens:
            outputs = QUANTITY_GROUPS
        elif not bad:
            outputs = tuple(g for g in QUANTITY_GROUPS if g in tokens)
            if not outputs:
                errors.append(f"line {lineno}: no quantities selected")

    raw_channels = False
    if "raw_channels" in sections["outputs"]:
        value, lineno = sections["outputs"]["raw_channels"]
        lowered = value.strip().lower()
        if lowered in ("true", "yes", "1"):
            raw_channels = True
        elif lowered in ("false", "no", "0"):
            raw_channels = False
        else:
            errors.append(f"line {lineno}: raw_channels must be boolean, got {value!r}")

    oracle = None
    if sections["oracle"]:
        t_final = take_float("oracle", "t_final")
        n_traj = take_int("oracle", "n_trajectories")
        seed = take_int("oracle", "seed", 0)
        points: tuple[float, ...] = ()
        if "points" in sections["oracle"]:
            value, lineno = sections["oracle"]["points"]
            try:
                points = tuple(float(tok) for tok in value.split(","))
            except ValueError:
                errors.append(f"line {lineno}: non-numeric oracle points: {value!r}")
        if t_final is not None and n_traj is not None:
            oracle = OracleSpec(t_final=t_final, n_trajectories=n_traj,
                                seed=seed, points=points)

    if errors:
        raise ConfigError(errors)

    fixed = RateParams(**model_values)
    grid = tuple(float(v) for v in np.linspace(start, stop, count))
    return SweepSpec(regimes=regimes, fixed=fixed, swept=swept, grid=grid,
                     outputs=outputs, gamma_phi_values=gamma_phi_values,
                     raw_channels=raw_channels, oracle=oracle)


def _params_at(spec: SweepSpec, value: float, gamma_phi_override):
    changes = {spec.swept: value}
    if gamma_phi_override is not None and spec.swept != "gamma_phi":
        changes["gamma_phi"] = gamma_phi_override
    return spec.fixed.replace(**changes)


def _evaluate_point(spec: SweepSpec, regime: str, gamma_phi_override,
                    value: float) -> SweepRow:
    params = _params_at(spec, value, gamma_phi_override)
    gamma_phi = params.gamma_phi
    try:
        cs = full_cumulant_set(regime, params, cross_check=False)
        return SweepRow(regime=regime, gamma_phi=gamma_phi, value=value,
                        status="ok", cumulants=cs)
    except Exception as exc:  # row-level isolation: record, do not abort
        return SweepRow(regime=regime, gamma_phi=gamma_phi, value=value,
                        status="error", error=f"{type(exc).__name__}: {exc}")


def _oracle_rows(spec: SweepSpec) -> list[SweepRow]:
    if spec.oracle is None:
        return []
    from .montecarlo import TrajectoryConfig, empirical_cumulants, simulate

    rows = []
    points = spec.oracle.points or (spec.grid[0], spec.grid[-1])
    for value in points:
        params = _params_at(spec, value, None)
        try:
            cfg = TrajectoryConfig(t_final=spec.oracle.t_final,
                                   n_trajectories=spec.oracle.n_trajectories,
                                   seed=spec.oracle.seed)
            samples = simulate(params, cfg)
            emp = empirical_cumulants(samples, cfg.t_final)
            cs = CumulantSet(first=emp.first, second=emp.second,
                             third=emp.third)
            se = {"first": emp.first_se, "second": emp.second_se,
                  "third": emp.third_se}
            rows.append(SweepRow(regime="oracle", gamma_phi=params.gamma_phi,
                                 value=value, status="ok", cumulants=cs,
                                 errors_se=se))
        except Exception as exc:
            rows.append(SweepRow(regime="oracle", gamma_phi=params.gamma_phi,
                                 value=value, status="error",
                                 error=f"{type(exc).__name__}: {exc}"))
    return rows


def run_sweep(spec: SweepSpec, threads: int = 1) -> SweepResult:
    """Evaluate the full cumulant set at every (regime, grid) point.

    Failing points are recorded as error rows; ordering is by regime block
    then grid index and is independent of the thread count.
    """
    tasks = [(regime, override, value)
             for regime, override in spec.regime_blocks()
             for value in spec.grid]
    if threads > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(
                lambda t: _evaluate_point(spec, *t), tasks))
    else:
        rows = [_evaluate_point(spec, *task) for task in tasks]
    rows.extend(_oracle_rows(spec))
    return SweepResult(spec=spec, rows=rows)


def derived_quantity(cs: CumulantSet, column: str) -> float:
    kind, rest = column.split("_", 1)
    if kind == "I":
        variant, lead = rest.split("_")
        order, leads = 1, lead
        comb_kind = "spin" if variant == "s" else "charge"
    elif kind == "S":
        _, leads = rest.split("_")
        order, comb_kind = 2, "spin"
    elif kind == "C":
        _, leads = rest.split("_")
        order, comb_kind = 3, "spin"
    else:
        raise ValueError(f"unknown derived column {column!r}")
    return spin_sign_combination(cs, order, leads, kind=comb_kind)


def _derived_se(row: SweepRow, column: str) -> float | None:
    """Jackknife-free error propagation for oracle rows (linear combos)."""
    if not row.errors_se:
        return None
    # standard error of a +/-1-weighted sum: quadrature over involved entries
    kind, rest = column.split("_", 1)
    variant, leads = rest.split("_")
    order = {"I": 1, "S": 2, "C": 3}[kind]
    comb_kind = "spin" if variant == "s" else "charge"
    from .montecarlo import spin_combination_weights
    weights = spin_combination_weights(order, leads, comb_kind)
    se = {1: row.errors_se["first"], 2: row.errors_se["second"],
          3: row.errors_se["third"]}[order]
    return float(np.sqrt(np.sum((weights * se) ** 2)))


def _raw_columns(spec: SweepSpec) -> list[str]:
    cols = []
    if "currents" in spec.outputs:
        cols += [f"I_{_CHANNEL_SHORT[i]}" for i in range(4)]
    if "noise" in spec.outputs:
        cols += [f"S_{_CHANNEL_SHORT[i]}_{_CHANNEL_SHORT[j]}"
                 for i, j in itertools.combinations_with_replacement(range(4), 2)]
    if "third" in spec.outputs:
        cols += [f"C_{_CHANNEL_SHORT[i]}_{_CHANNEL_SHORT[j]}_{_CHANNEL_SHORT[k]}"
                 for i, j, k in itertools.combinations_with_replacement(range(4), 3)]
    return cols


def _raw_value(cs: CumulantSet, column: str) -> float:
    parts = column.split("_")
    channels = tuple(_CHANNEL_SHORT.index(p) for p in parts[1:])
    return float(cs.tensor(len(channels))[channels])


def csv_columns(spec: SweepSpec) -> list[str]:
    """Column order of the sweep CSV for a given spec (see README)."""
    cols = ["regime", "gamma_phi/Gamma", f"{spec.swept}/Gamma", "status"]
    derived = [c for group in spec.outputs for c in GROUP_COLUMNS[group]]
    cols += [f"{c}/Gamma" for c in derived]
    if spec.raw_channels:
        cols += [f"{c}/Gamma" for c in _raw_columns(spec)]
    if spec.oracle is not None:
        cols += [f"{c}_se/Gamma" for c in derived]
    cols.append("error")
    return cols


def _format(value: float) -> str:
    """Shortest decimal that round-trips the double exactly."""
    return repr(float(value))


def emit_csv(result: SweepResult, destination) -> None:
    """Write the sweep table; byte-identical for identical specs.

    ``destination`` is a path or a text file object.  All rates are in units
    of the reference rate (Gamma); failed rows keep their position with an
    empty numeric section and a non-"ok" status.
    """
    spec = result.spec
    derived = [c for group in spec.outputs for c in GROUP_COLUMNS[group]]
    raw_cols = _raw_columns(spec) if spec.raw_channels else []

    def render(fh):
        fh.write(",".join(csv_columns(spec)) + "\n")
        for row in result.rows:
            cells = [row.regime, _format(row.gamma_phi), _format(row.value),
                     row.status]
            if row.status == "ok" and row.cumulants is not None:
                cells += [_format(derived_quantity(row.cumulants, c))
                          for c in derived]
                cells += [_format(_raw_value(row.cumulants, c))
                          for c in raw_cols]
                if spec.oracle is not None:
                    ses = [_derived_se(row, c) for c in derived]
                    cells += ["" if se is None else _format(se) for se in ses]
            else:
                cells += [""] * len(derived)
                cells += [""] * len(raw_cols)
                if spec.oracle is not None:
                    cells += [""] * len(derived)
            cells.append(row.error.replace(",", ";"))
            fh.write(",".join(cells) + "\n")

    if hasattr(destination, "write"):
        render(destination)
    else:
        with open(destination, "w", encoding="utf-8", newline="") as fh:
            render(fh)


class WrongGridError(ValueError):
    """The sweep does not provide the quantities a figure needs."""


def _figure_table(result: SweepResult, columns_by_regime, quantity_columns):
    spec = result.spec
    by_key = {}
    for row in result.rows:
        if row.regime == "oracle":
            continue
        by_key.setdefault(row.regime, {})[row.value] = row
    missing = [r for r in columns_by_regime if r not in by_key]
    if missing:
        raise WrongGridError(f"sweep lacks regimes: {', '.join(missing)}")
    lines = []
    header = [f"{spec.swept}/Gamma"]
    for col in quantity_columns:
        for regime in columns_by_regime:
            header.append(f"{col}_{regime}/Gamma")
    lines.append(",".join(header))
    for value in spec.grid:
        cells = [_format(value)]
        for col in quantity_columns:
            for regime in columns_by_regime:
                row = by_key[regime].get(value)
                if row is None or row.status != "ok":
                    cells.append("")
                else:
                    cells.append(_format(derived_quantity(row.cumulants, col)))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def _sign_set(values) -> str:
    signs = set()
    for v in values:
        if v > 0:
            signs.add("positive")
        elif v < 0:
            signs.add("negative")
        else:
            signs.add("zero")
    return "{" + "+".join(sorted(signs)) + "}"


def emit_figure_data(result: SweepResult, figure: str) -> str:
    """Figure-reproduction dataset as structured text.

    ``fig2``: swept value, spin current and third-moment auto/cross columns
    for each regime.  ``fig3``: the spin-noise auto and cross columns.
    ``table1``: a three-row qualitative summary computed from the data.
    """
    spec = result.spec
    if figure in ("fig2", "fig3"):
        regimes = [r for r in ("coherent", "incoherent") if r in spec.regimes]
        if not regimes:
            raise WrongGridError("figure data needs coherent and/or "
                                 "incoherent regimes in the sweep")
        if figure == "fig2":
            if not {"currents", "third"} <= set(spec.outputs):
                raise WrongGridError("fig2 needs 'currents' and 'third' outputs")
            return _figure_table(result, regimes,
                                 ("I_s_L", "C_s_LLL", "C_s_LLR"))
        if "noise" not in spec.outputs:
            raise WrongGridError("fig3 needs 'noise' outputs")
        return _figure_table(result, regimes, ("S_s_LL", "S_s_LR"))

    if figure != "table1":
        raise ValueError(f"unknown figure {figure!r}")

    needed = {"currents", "noise", "third"}
    if not needed <= set(spec.outputs):
        raise WrongGridError("table1 needs currents, noise and third outputs")
    regimes = [r for r in ("coherent", "incoherent") if r in spec.regimes]
    if len(regimes) < 2:
        raise WrongGridError("table1 compares the coherent and incoherent "
                             "regimes; sweep both")

    ok_rows = {r: [row for row in result.rows
                   if row.regime == r and row.status == "ok"]
               for r in regimes}
    lines = ["moment,coherent,incoherent"]

    def describe_first(rows):
        max_charge = max(max(abs(derived_quantity(row.cumulants, "I_c_L")),
                             abs(derived_quantity(row.cumulants, "I_c_R")))
                         for row in rows)
        has_spin = any(abs(derived_quantity(row.cumulants, "I_s_L")) > 1e-12
                       for row in rows)
        if max_charge <= 1e-10 and has_spin:
            return "pure spin current"
        return f"charge current up to {max_charge:.2e}"

    lines.append("1st," + ",".join(describe_first(ok_rows[r]) for r in regimes))

    def describe_noise(rows):
        signs = _sign_set(derived_quantity(row.cumulants, "S_s_LR")
                          for row in rows)
        return f"S_s_LR signs {signs}"

    lines.append("2nd," + ",".join(describe_noise(ok_rows[r]) for r in regimes))

    def describe_third(rows):
        auto = _sign_set(derived_quantity(row.cumulants, "C_s_LLL")
                         for row in rows)
        cross = _sign_set(derived_quantity(row.cumulants, "C_s_LLR")
                          for row in rows)
        return f"C_s_LLL signs {auto}; C_s_LLR signs {cross}"

    lines.append("3rd," + ",".join(describe_third(ok_rows[r]) for r in regimes))
    return "\n".join(lines) + "\n"


def default_figure_spec(count: int = 60, oracle: OracleSpec | None = None) -> SweepSpec:
    """The reference sweep: equal couplings Gamma = 1, zero detuning,
    r_rf from 0.05 to 3.0, coherent and incoherent regimes."""
    return SweepSpec(
        regimes=("coherent", "incoherent"),
        fixed=RateParams.symmetric(1.0, 0.5),
        swept="r_rf",
        grid=tuple(float(v) for v in np.linspace(0.05, 3.0, count)),
        outputs=QUANTITY_GROUPS,
        oracle=oracle,
    )
