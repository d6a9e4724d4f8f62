"""Scenario configuration, experiment families and result serialization.

Three sweep families mirror the evaluation campaigns: transmit power versus
harvested-energy requirement for a bank of harvester models, power versus the
second user's range for the power-splitting modes and baselines, and a
Monte Carlo sweep over decoder-SINR targets comparing the mapping schemes on
randomly placed users.

Every row derives its randomness from (master seed, realization index), so
scheme and model comparisons share user placements and weight initializations
(common random numbers), repeated invocations are byte-identical, and worker
count never changes output bytes (tasks are collated in submission order).
"""

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace

import numpy as np

from dma_swipt.alternating import OptimizerConfig, RunRecord, SwiptScenario, run, run_fd_baseline
from dma_swipt.dma import QosTargets, WaveguideModel
from dma_swipt.energy import InfeasibleThresholdError, parse_eh_model
from dma_swipt.geometry import ArrayGeometry, half_wavelength_geometry
from dma_swipt.lorentzian import SCHEMES
from dma_swipt.precoder import PsMode


class ConfigError(ValueError):
    """Malformed or inconsistent scenario configuration."""


def dbm_to_watts(dbm: float) -> float:
    return 1e-3 * 10.0 ** (float(dbm) / 10.0)


def watts_to_dbm(watts: float) -> float:
    if watts <= 0.0:
        raise ValueError("power must be positive to express in dBm")
    return 10.0 * np.log10(watts / 1e-3)


# the harvester bank used by the EH sweep: one linear reference plus logistic
# variants sharing the same saturation level.  The logistic steepness/midpoint
# pairs are placeholders chosen to span slow-to-fast turn-on behaviour; they
# are configuration inputs, not authoritative hardware constants.
DEFAULT_EH_MODELS = (
    "linear:eta=0.5",
    "logistic:esat_dbm=13.8,a=150,b=0.014",
    "logistic:esat_dbm=13.8,a=600,b=0.008",
    "logistic:esat_dbm=13.8,a=1500,b=0.0022",
    "logistic:esat_dbm=13.8,a=6400,b=0.003",
)

MC_SCHEME_SET = (
    ("fd", "ops"),
    ("uw", "ops"),
    ("arlch", "ops"),
    ("arlch", "eps"),
    ("lcush", "ops"),
    ("lcph", "ops"),
    ("aoh", "ops"),
)


@dataclass(frozen=True)
class ScenarioConfig:
    """Flat, file-loadable description of one optimization scenario.

    Defaults reproduce the reference setup: 28 GHz carrier, 8 strips of 64
    elements at half-wavelength spacing, microstrip attenuation 0.6 1/m and
    propagation constant 827.67 rad/m, antenna noise -70 dBm.
    """

    n_rows: int = 8
    n_cols: int = 64
    carrier_frequency_hz: float = 28e9
    attenuation_per_m: float = 0.6
    phase_constant_rad_per_m: float = 827.67
    gain_exponent: float = 2.0
    n_users: int = 2
    user_positions_m: tuple = ()  # empty: place users on boresight at 0.1/0.3 of the Fraunhofer distance
    sinr_target_db: float = 10.0
    eh_threshold_dbm: float = -10.0
    antenna_noise_dbm: float = -70.0
    conversion_noise_dbm: float = -50.0
    eh_model: str = "linear:eta=0.5"
    scheme: str = "arlch"
    ps: str = "ops"
    seed: int = 0
    max_iterations: int = 20
    improvement_tol: float = 1e-3
    improvement_patience: int = 3
    solver_tolerance: float = 1e-8

    def __post_init__(self):
        if self.scheme not in SCHEMES and self.scheme != "fd":
            raise ConfigError(f"unknown scheme {self.scheme!r}")
        try:
            PsMode.parse(self.ps)
            parse_eh_model(self.eh_model)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.n_users < 1:
            raise ConfigError("need at least one user")
        if self.scheme != "fd" and self.n_users > self.n_rows:
            raise ConfigError(
                f"{self.n_users} users need at least {self.n_users} RF chains (n_rows)"
            )

    @classmethod
    def desk_scale(cls, **overrides) -> "ScenarioConfig":
        """Small array used by tests and default sweeps (4 strips x 8 elements)."""
        overrides.setdefault("n_rows", 4)
        overrides.setdefault("n_cols", 8)
        return cls(**overrides)

    def geometry(self) -> ArrayGeometry:
        return half_wavelength_geometry(
            self.carrier_frequency_hz, self.n_rows, self.n_cols, self.gain_exponent
        )

    def waveguide(self) -> WaveguideModel:
        return WaveguideModel.uniform(
            self.geometry(), self.attenuation_per_m, self.phase_constant_rad_per_m
        )

    def targets(self) -> QosTargets:
        return QosTargets.broadcast(
            self.n_users,
            10.0 ** (self.sinr_target_db / 10.0),
            dbm_to_watts(self.eh_threshold_dbm),
            dbm_to_watts(self.antenna_noise_dbm),
            dbm_to_watts(self.conversion_noise_dbm),
        )

    def default_positions(self) -> np.ndarray:
        d_f = self.geometry().fraunhofer_distance
        fractions = np.linspace(0.1, 0.1 + 0.2 * (self.n_users - 1), self.n_users)
        return np.array([[0.0, 0.0, f * d_f] for f in fractions])

    def positions(self) -> np.ndarray:
        if len(self.user_positions_m) == 0:
            return self.default_positions()
        pos = np.asarray(self.user_positions_m, float).reshape(-1, 3)
        if pos.shape[0] != self.n_users:
            raise ConfigError("user_positions_m does not match n_users")
        return pos

    def scenario(self, positions=None) -> SwiptScenario:
        return SwiptScenario.build(
            self.geometry(),
            self.waveguide(),
            self.positions() if positions is None else positions,
            self.targets(),
            parse_eh_model(self.eh_model),
        )

    def optimizer(self, seed=None, scheme=None, ps=None) -> OptimizerConfig:
        return OptimizerConfig(
            max_iterations=self.max_iterations,
            seed=self.seed if seed is None else int(seed),
            scheme=self.scheme if scheme is None else scheme,
            ps_mode=PsMode.parse(self.ps if ps is None else ps),
            solver_tolerance=self.solver_tolerance,
            improvement_tol=self.improvement_tol,
            improvement_patience=self.improvement_patience,
        )

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "user_positions_m":
                v = [list(map(float, p)) for p in np.asarray(v, float).reshape(-1, 3)] if len(v) else []
            out[f.name] = v
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        known = {f.name: f.type for f in fields(cls)}
        unknown = set(data) - set(known)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(data)
        if "user_positions_m" in kwargs:
            flat = np.asarray(kwargs["user_positions_m"], float)
            kwargs["user_positions_m"] = tuple(map(tuple, flat.reshape(-1, 3)))
        for name in ("n_rows", "n_cols", "n_users", "seed", "max_iterations", "improvement_patience"):
            if name in kwargs:
                kwargs[name] = int(kwargs[name])
        for name in (
            "carrier_frequency_hz", "attenuation_per_m", "phase_constant_rad_per_m",
            "gain_exponent", "sinr_target_db", "eh_threshold_dbm", "antenna_noise_dbm",
            "conversion_noise_dbm", "improvement_tol", "solver_tolerance",
        ):
            if name in kwargs:
                kwargs[name] = float(kwargs[name])
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


def load_config(path: str) -> ScenarioConfig:
    """Read a config file: JSON object or flat ``key = value`` lines."""
    with open(path) as fh:
        text = fh.read()
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            return ScenarioConfig.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"bad JSON config: {exc}") from None
    data: dict = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value")
        key, val = (part.strip() for part in line.split("=", 1))
        if key == "user_positions_m":
            pts = [p for p in val.split(";") if p.strip()]
            data[key] = [[float(x) for x in p.split(",")] for p in pts]
        elif key in ("eh_model", "scheme", "ps"):
            data[key] = val
        else:
            try:
                data[key] = float(val)
            except ValueError:
                raise ConfigError(f"line {lineno}: bad numeric value {val!r}") from None
    return ScenarioConfig.from_dict(data)


def format_config(config: ScenarioConfig) -> str:
    lines = []
    for key, val in config.to_dict().items():
        if key == "user_positions_m":
            val = ";".join(",".join(repr(float(x)) for x in p) for p in val)
        elif isinstance(val, float):
            val = repr(val)
        lines.append(f"{key} = {val}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Result rows
# ---------------------------------------------------------------------------

RESULT_FIELDS = (
    "scenario_id",
    "seed",
    "scheme",
    "ps_mode",
    "k_users",
    "sweep_value",
    "p_tx_dbm",
    "feasible",
    "sinr_margins",
    "eh_margins",
    "iterations",
    "wall_clock_s",
)


@dataclass
class ResultRow:
    scenario_id: str
    seed: int
    scheme: str
    ps_mode: str
    k_users: int
    sweep_value: float
    p_tx_dbm: float | None
    feasible: bool
    sinr_margins: tuple = ()
    eh_margins: tuple = ()
    iterations: int = 0
    wall_clock_s: float = 0.0
    status: str = "ok"  # not serialized: ok | infeasible | solver-failure


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (tuple, list)):
        return ";".join(repr(float(v)) for v in x)
    if isinstance(x, float):
        return repr(float(x))
    return str(x)


def _csv_quote(field: str) -> str:
    if any(ch in field for ch in ',"\n'):
        return '"' + field.replace('"', '""') + '"'
    return field


def rows_to_csv(rows, include_timing: bool = False) -> str:
    lines = [",".join(RESULT_FIELDS)]
    for r in rows:
        vals = [
            r.scenario_id,
            str(r.seed),
            r.scheme,
            r.ps_mode,
            str(r.k_users),
            _fmt(r.sweep_value),
            _fmt(r.p_tx_dbm),
            _fmt(r.feasible),
            _fmt(r.sinr_margins),
            _fmt(r.eh_margins),
            str(r.iterations),
            _fmt(r.wall_clock_s) if include_timing else "",
        ]
        lines.append(",".join(_csv_quote(v) for v in vals))
    return "\n".join(lines) + "\n"


def rows_to_json(rows) -> str:
    payload = []
    for r in rows:
        d = {name: getattr(r, name) for name in RESULT_FIELDS}
        d["sinr_margins"] = list(map(float, r.sinr_margins))
        d["eh_margins"] = list(map(float, r.eh_margins))
        d["status"] = r.status
        payload.append(d)
    return json.dumps(payload, indent=1) + "\n"


def _record_to_row(record: RunRecord, scenario_id, seed, scheme, ps_label, k_users, sweep_value) -> ResultRow:
    feasible = record.feasible
    return ResultRow(
        scenario_id=scenario_id,
        seed=int(seed),
        scheme=scheme,
        ps_mode=ps_label,
        k_users=k_users,
        sweep_value=float(sweep_value),
        p_tx_dbm=watts_to_dbm(record.best_power) if feasible else None,
        feasible=feasible,
        sinr_margins=tuple(map(float, record.sinr_margins)) if feasible else (),
        eh_margins=tuple(
            float(m) if np.isfinite(m) else 1e308 for m in record.eh_margins
        ) if feasible else (),
        iterations=record.iterations_used,
        wall_clock_s=sum(record.stage_seconds.values()),
        status=record.status,
    )


def _infeasible_row(scenario_id, seed, scheme, ps_label, k_users, sweep_value) -> ResultRow:
    return ResultRow(
        scenario_id=scenario_id,
        seed=int(seed),
        scheme=scheme,
        ps_mode=ps_label,
        k_users=k_users,
        sweep_value=float(sweep_value),
        p_tx_dbm=None,
        feasible=False,
        status="infeasible",
    )


# ---------------------------------------------------------------------------
# Sweep specification and execution
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepSpec:
    family: str  # "eh-threshold" | "user-separation" | "sinr-montecarlo"
    grid: tuple
    realizations: int = 1
    base: ScenarioConfig = field(default_factory=ScenarioConfig.desk_scale)
    eh_models: tuple = DEFAULT_EH_MODELS
    ps_modes: tuple = ("ops", "eps", "fixed:0.1", "fixed:0.9")
    schemes: tuple = ("arlch", "uw", "fd")
    mc_set: tuple = MC_SCHEME_SET

    def __post_init__(self):
        if len(self.grid) == 0:
            raise ConfigError("sweep grid must be nonempty")
        if self.realizations < 1:
            raise ConfigError("need at least one realization")


def _derive_seeds(master_seed: int, realization: int):
    """(placement rng, optimizer seed) shared by all schemes of a realization."""
    base = np.random.SeedSequence([int(master_seed) & 0xFFFFFFFF, realization])
    placement, init = base.spawn(2)
    opt_seed = int(init.generate_state(1, dtype=np.uint64)[0])
    return np.random.default_rng(placement), opt_seed


# Monte Carlo drops cover a +/-60 degree sector: beyond it the element
# pattern rolls off toward zero and drops become dominated by unservable
# edge users instead of the scheme under test.
MC_SECTOR_HALF_ANGLE = np.pi / 3


def sample_annulus_users(rng, geometry: ArrayGeometry, k_users: int) -> np.ndarray:
    """Users uniform in range over [0.1, 1] Fraunhofer distances, uniform in
    boresight angle across a +/-60 degree xz-plane sector."""
    d_f = geometry.fraunhofer_distance
    radii = rng.uniform(0.1 * d_f, d_f, k_users)
    angles = rng.uniform(-MC_SECTOR_HALF_ANGLE, MC_SECTOR_HALF_ANGLE, k_users)
    return np.column_stack(
        [radii * np.sin(angles), np.zeros(k_users), radii * np.cos(angles)]
    )


def _execute_point(task):
    """One (scenario, scheme, ps) optimization; module-level for pickling."""
    level = os.environ.get("DMA_SWIPT_LOG_LEVEL")
    if level:
        import logging

        logging.getLogger("dma_swipt").setLevel(level)
    (scenario_id, config, positions, rf_override, scheme, ps, opt_seed, sweep_value) = task
    k = config.n_users
    label = PsMode.parse(ps).label()
    try:
        scenario = config.scenario(positions)
    except InfeasibleThresholdError:
        return _infeasible_row(scenario_id, opt_seed, scheme, label, k, sweep_value)
    if rf_override is not None:
        scenario = replace(scenario, rf_floor=np.asarray(rf_override, float))
    opt = config.optimizer(seed=opt_seed, scheme=scheme if scheme != "fd" else "uw", ps=ps)
    record = run_fd_baseline(scenario, opt) if scheme == "fd" else run(scenario, opt)
    return _record_to_row(record, scenario_id, opt_seed, scheme, label, k, sweep_value)


def _run_tasks(tasks, parallel: int = 1):
    if parallel <= 1 or len(tasks) <= 1:
        return [_execute_point(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=parallel) as pool:
        return list(pool.map(_execute_point, tasks, chunksize=1))


def run_eh_sweep(spec: SweepSpec, parallel: int = 1):
    """Transmit power versus harvested-energy requirement, per EH model.

    Targets at or beyond a logistic model's saturation produce infeasible
    rows (the threshold inversion diverges before any solve is attempted).
    """
    base = spec.base
    tasks = []
    for model_spec in spec.eh_models:
        for eth_dbm in spec.grid:
            for real in range(spec.realizations):
                _, opt_seed = _derive_seeds(base.seed, real)
                cfg = replace(base, eh_model=model_spec, eh_threshold_dbm=float(eth_dbm))
                sid = f"eh-sweep/{model_spec}"
                tasks.append((sid, cfg, None, None, cfg.scheme, cfg.ps, opt_seed, eth_dbm))
    return _run_tasks(tasks, parallel)


def run_separation_sweep(spec: SweepSpec, parallel: int = 1):
    """Transmit power versus the second user's range, across PS modes/schemes.

    The first user sits at 0.1 Fraunhofer distances on boresight; the swept
    value is the second user's range in Fraunhofer units.
    """
    base = spec.base
    if base.n_users != 2:
        base = replace(base, n_users=2)
    d_f = base.geometry().fraunhofer_distance
    tasks = []
    for zeta in spec.grid:
        positions = np.array([[0.0, 0.0, 0.1 * d_f], [0.0, 0.0, float(zeta) * d_f]])
        for scheme in spec.schemes:
            for ps in spec.ps_modes:
                for real in range(spec.realizations):
                    _, opt_seed = _derive_seeds(base.seed, real)
                    sid = f"sep-sweep/sigma_c={base.conversion_noise_dbm}dBm"
                    tasks.append((sid, base, positions, None, scheme, ps, opt_seed, zeta))
    return _run_tasks(tasks, parallel)


def run_sinr_montecarlo(spec: SweepSpec, parallel: int = 1):
    """Mean transmit power versus decoder-SINR target over random user drops."""
    base = spec.base
    geometry = base.geometry()
    tasks = []
    for delta_db in spec.grid:
        cfg = replace(base, sinr_target_db=float(delta_db))
        for real in range(spec.realizations):
            placement_rng, opt_seed = _derive_seeds(base.seed, real)
            positions = sample_annulus_users(placement_rng, geometry, base.n_users)
            for scheme, ps in spec.mc_set:
                sid = f"mc/K{base.n_users}"
                tasks.append((sid, cfg, positions, None, scheme, ps, opt_seed, delta_db))
    return _run_tasks(tasks, parallel)
