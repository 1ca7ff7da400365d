"""File formats: panel CSV, run configuration, fit reports and GOF output.

Panel files are UTF-8 CSV with header ``path_id,time,state``; times are
written with 17 significant digits so read(write(d)) reproduces d exactly.
Configuration is INI-style with ``[model]``, ``[estimation]`` and
``[study]`` sections (see the README for the full key list).  All writes
are atomic: a temp file in the target directory is renamed into place.
"""

from __future__ import annotations

import configparser
import csv
import io
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, PanelFormatError, ValidationError
from .estimator import FitConfig, FitResult
from .generator import InitialDistribution, SubIntensityMatrix
from .paths import PanelObservationSet, PanelPath
from .scaling import GOMPERTZ, IDENTITY, WEIBULL

PANEL_HEADER = ["path_id", "time", "state"]
_G17 = "%.17g"


# ---------------------------------------------------------------------------
# atomic write helper


def _atomic_write(path, text: str) -> None:
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    try:
        fd, tmp = tempfile.mkstemp(dir=directory, prefix=".iphfit-", suffix=".tmp")
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except OSError as err:
        raise ValidationError(f"cannot write {path}: {err}") from err


# ---------------------------------------------------------------------------
# panel files


def read_panel(file, n: int) -> PanelObservationSet:
    """Parse a panel CSV into a validated observation set.

    ``file`` is a path or a text file object; ``n`` is the declared number
    of transient states (records with larger state indices are rejected).
    Paths appear in first-occurrence order; the rows of one path must be
    contiguous or at least time-ordered per path.
    """
    if hasattr(file, "read"):
        return _read_panel_stream(file, n)
    try:
        with open(file, "r", encoding="utf-8", newline="") as handle:
            return _read_panel_stream(handle, n)
    except OSError as err:
        raise ValidationError(f"cannot read {file}: {err}") from err


def _read_panel_stream(stream, n: int) -> PanelObservationSet:
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise PanelFormatError("empty file; expected header path_id,time,state")
    if [h.strip() for h in header] != PANEL_HEADER:
        raise PanelFormatError(
            f"bad header {','.join(header)!r}; expected path_id,time,state", line=1
        )
    order: list[str] = []
    times: dict[str, list[float]] = {}
    states: dict[str, list[int]] = {}
    for lineno, row in enumerate(reader, start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != 3:
            raise PanelFormatError(f"expected 3 fields, got {len(row)}", line=lineno)
        pid = row[0].strip()
        if not pid:
            raise PanelFormatError("empty path_id", line=lineno)
        try:
            t = float(row[1])
        except ValueError:
            raise PanelFormatError(f"malformed time {row[1]!r}", line=lineno)
        try:
            x = int(row[2])
        except ValueError:
            raise PanelFormatError(f"malformed state {row[2]!r}", line=lineno)
        if not np.isfinite(t) or t < 0.0:
            raise PanelFormatError(f"time must be finite and >= 0, got {t!r}", line=lineno)
        if pid not in times:
            order.append(pid)
            times[pid] = []
            states[pid] = []
        elif times[pid] and t <= times[pid][-1]:
            raise PanelFormatError(
                f"non-increasing times within path {pid!r}", line=lineno
            )
        if states[pid] and states[pid][-1] == n + 1:
            raise PanelFormatError(
                f"absorbing state not terminal in path {pid!r}", line=lineno
            )
        if not (1 <= x <= n + 1):
            raise PanelFormatError(
                f"state {x} outside 1..{n + 1} in path {pid!r}", line=lineno
            )
        times[pid].append(t)
        states[pid].append(x)
    paths = []
    for pid in order:
        try:
            paths.append(
                PanelPath(
                    path_id=pid,
                    times=np.asarray(times[pid]),
                    states=np.asarray(states[pid], dtype=np.int64),
                )
            )
        except ValidationError as err:
            raise PanelFormatError(str(err)) from err
    return PanelObservationSet(n=n, paths=tuple(paths))


def format_panel(data: PanelObservationSet) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(PANEL_HEADER)
    for p in data.paths:
        for t, x in zip(p.times, p.states):
            writer.writerow([p.path_id, _G17 % t, int(x)])
    return buf.getvalue()


def write_panel(data: PanelObservationSet, file) -> None:
    """Serialize a panel; exact inverse of :func:`read_panel`."""
    _atomic_write(file, format_panel(data))


# ---------------------------------------------------------------------------
# absorption-time sample files


def read_sample(file) -> np.ndarray:
    """One-column CSV of absorption times (header ``absorption_time``)."""
    try:
        with open(file, "r", encoding="utf-8", newline="") as handle:
            reader = csv.reader(handle)
            header = next(reader, None)
            if header is None or header[0].strip() != "absorption_time":
                raise PanelFormatError(
                    "expected header absorption_time", line=1
                )
            vals = []
            for lineno, row in enumerate(reader, start=2):
                if not row or not row[0].strip():
                    continue
                try:
                    vals.append(float(row[0]))
                except ValueError:
                    raise PanelFormatError(f"malformed value {row[0]!r}", line=lineno)
    except OSError as err:
        raise ValidationError(f"cannot read {file}: {err}") from err
    return np.asarray(vals, dtype=float)


def write_sample(values, file) -> None:
    lines = ["absorption_time"]
    lines += [_G17 % v for v in np.asarray(values, dtype=float)]
    _atomic_write(file, "\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# run configuration


@dataclass(frozen=True)
class RunConfig:
    """Parsed configuration file.

    The model block declares the state count, family and (for simulation)
    the true parameters; the estimation block holds the fit
    hyperparameters; the study block sizes simulated datasets.
    """

    n: int
    family: str  # gompertz | weibull | homogeneous
    beta0: float = 1.0
    true_beta: float | None = None
    true_pi: InitialDistribution | None = None
    true_lambda: SubIntensityMatrix | None = None
    eta: float = 1e-6
    e_ell: float = 0.01
    beta_min: float = 1e-5
    max_sem_iterations: int = 200
    gd_max_steps: int = 100_000
    max_attempts: int = 1_000_000
    seed: int | None = None
    homog_iterations: int = 300
    homog_tail_average: int = 20
    bridge_replications: int = 1
    paths: int | None = None
    horizon: float | None = None
    delta: float | None = None
    times_file: str | None = None

    @property
    def homogeneous(self) -> bool:
        return self.family == "homogeneous"

    def fit_config(self, seed: int) -> FitConfig:
        kind = IDENTITY if self.homogeneous else self.family
        return FitConfig(
            family=kind,
            beta0=self.beta0,
            eta=self.eta,
            e_ell=self.e_ell,
            beta_min=self.beta_min,
            max_sem_iterations=self.max_sem_iterations,
            gd_max_steps=self.gd_max_steps,
            max_attempts=self.max_attempts,
            seed=seed,
            homogeneous_mode=self.homogeneous,
            homog_iterations=self.homog_iterations,
            homog_tail_average=self.homog_tail_average,
            bridge_replications=self.bridge_replications,
        )

    def observation_grid(self) -> np.ndarray:
        """Grid for simulate/study runs: fixed spacing or explicit times."""
        if self.times_file is not None:
            grid = _read_grid_file(self.times_file)
        else:
            if self.delta is None or self.horizon is None:
                raise ConfigError(
                    "study block needs either times_file or both delta and horizon"
                )
            count = int(np.floor(self.horizon / self.delta + 1e-9))
            grid = np.arange(count + 1, dtype=float) * self.delta
        if grid.size == 0 or grid[0] != 0.0 or np.any(np.diff(grid) <= 0.0):
            raise ConfigError("observation grid must start at 0 and increase")
        return grid


def _read_grid_file(path) -> np.ndarray:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            vals = [float(line) for line in handle if line.strip()]
    except OSError as err:
        raise ConfigError(f"cannot read times_file {path}: {err}") from err
    except ValueError as err:
        raise ConfigError(f"malformed times_file {path}: {err}") from err
    return np.asarray(vals, dtype=float)


def _parse_vector(text: str) -> np.ndarray:
    try:
        return np.asarray([float(v) for v in text.split(",")], dtype=float)
    except ValueError as err:
        raise ConfigError(f"malformed vector {text!r}: {err}") from err


def _parse_matrix(text: str) -> np.ndarray:
    rows = [r for r in (row.strip() for row in text.split(";")) if r]
    return np.asarray([_parse_vector(r) for r in rows], dtype=float)


_FAMILY_NAMES = (GOMPERTZ, WEIBULL, "homogeneous")


def read_config(file) -> RunConfig:
    """Parse and validate an INI-style run configuration."""
    parser = configparser.ConfigParser()
    try:
        with open(file, "r", encoding="utf-8") as handle:
            parser.read_file(handle)
    except OSError as err:
        raise ConfigError(f"cannot read config {file}: {err}") from err
    except configparser.Error as err:
        raise ConfigError(f"malformed config {file}: {err}") from err

    def get(section, key, conv, default=None):
        if not parser.has_option(section, key):
            return default
        raw = parser.get(section, key)
        try:
            return conv(raw)
        except (ValueError, ConfigError) as err:
            raise ConfigError(f"[{section}] {key} = {raw!r}: {err}") from err

    if not parser.has_section("model"):
        raise ConfigError("config needs a [model] section")
    n = get("model", "n", int)
    if n is None or n < 1:
        raise ConfigError("[model] n must be a positive integer")
    family = get("model", "family", str.strip, "gompertz").lower()
    if family not in _FAMILY_NAMES:
        raise ConfigError(
            f"[model] family must be one of {', '.join(_FAMILY_NAMES)}"
        )
    pi_arr = get("model", "pi", _parse_vector)
    lam_arr = get("model", "lambda", _parse_matrix)
    true_pi = true_lam = None
    try:
        if pi_arr is not None:
            true_pi = InitialDistribution(pi_arr)
            if true_pi.n != n:
                raise ConfigError(f"[model] pi has {true_pi.n} entries, n = {n}")
        if lam_arr is not None:
            true_lam = SubIntensityMatrix(lam_arr)
            true_lam.require_valid()
            if true_lam.n != n:
                raise ConfigError(f"[model] lambda is {true_lam.n}x{true_lam.n}, n = {n}")
    except ValidationError as err:
        raise ConfigError(f"[model]: {err}") from err

    cfg = RunConfig(
        n=n,
        family=family,
        beta0=get("model", "beta0", float, 1.0),
        true_beta=get("model", "beta", float),
        true_pi=true_pi,
        true_lambda=true_lam,
        eta=get("estimation", "eta", float, 1e-6),
        e_ell=get("estimation", "e_ell", float, 0.01),
        beta_min=get("estimation", "beta_min", float, 1e-5),
        max_sem_iterations=get("estimation", "max_sem_iterations", int, 200),
        gd_max_steps=get("estimation", "gd_max_steps", int, 100_000),
        max_attempts=get("estimation", "max_attempts", int, 1_000_000),
        seed=get("estimation", "seed", int),
        homog_iterations=get("estimation", "homog_iterations", int, 300),
        homog_tail_average=get("estimation", "homog_tail_average", int, 20),
        bridge_replications=get("estimation", "bridge_replications", int, 1),
        paths=get("study", "paths", int),
        horizon=get("study", "horizon", float),
        delta=get("study", "delta", float),
        times_file=get("study", "times_file", str.strip),
    )
    try:
        cfg.fit_config(seed=cfg.seed if cfg.seed is not None else 0)
    except ValidationError as err:
        raise ConfigError(str(err)) from err
    if cfg.paths is not None and cfg.paths < 0:
        raise ConfigError("[study] paths must be >= 0")
    if cfg.true_beta is not None and cfg.true_beta <= 0:
        raise ConfigError("[model] beta must be positive")
    return cfg


# ---------------------------------------------------------------------------
# fit reports


def _fmt_row(values) -> str:
    return ",".join(_G17 % v for v in values)


def format_report(result: FitResult, n: int, paths: int) -> str:
    cfg = result.config
    lines = [
        "# iphfit run report",
        "format,1",
        f"family,{cfg.family}",
        f"n,{n}",
        f"paths,{paths}",
        f"seed,{cfg.seed}",
        f"homogeneous_mode,{int(cfg.homogeneous_mode)}",
        f"beta0,{_G17 % cfg.beta0}",
        f"eta,{_G17 % cfg.eta}",
        f"e_ell,{_G17 % cfg.e_ell}",
        f"beta_min,{_G17 % cfg.beta_min}",
        f"max_sem_iterations,{cfg.max_sem_iterations}",
        f"homog_iterations,{cfg.homog_iterations}",
        f"homog_tail_average,{cfg.homog_tail_average}",
        f"termination,{result.termination}",
        f"iterations_used,{result.iterations_used}",
    ]
    if result.beta_hat is not None:
        lines.append(f"beta_hat,{_G17 % result.beta_hat}")
    lines += ["", "[pi_hat]", _fmt_row(result.pi_hat.probabilities)]
    lines += ["", "[lambda_hat]"]
    lines += [_fmt_row(row) for row in result.lam_hat.entries]
    lines += ["", "[trace]"]
    header = ["iteration", "gd_updates", "absorbed_paths", "beta_hat"]
    header += [f"lambda_{i + 1}_{j + 1}" for i in range(n) for j in range(n)]
    lines.append(",".join(header))
    for rec in result.trace:
        row = [str(rec.iteration), str(rec.gd_updates), str(rec.absorbed_paths)]
        row.append("" if rec.beta_hat is None else _G17 % rec.beta_hat)
        row += [_G17 % v for v in rec.lam_hat.entries.ravel()]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def write_report(result: FitResult, n: int, paths: int, file) -> None:
    _atomic_write(file, format_report(result, n, paths))


@dataclass(frozen=True)
class FitReport:
    """The subset of a run report needed downstream (GOF simulation)."""

    family: str
    n: int
    seed: int
    homogeneous_mode: bool
    termination: str
    iterations_used: int
    beta_hat: float | None
    pi_hat: InitialDistribution
    lam_hat: SubIntensityMatrix
    keys: dict = field(default_factory=dict)


def read_report(file) -> FitReport:
    try:
        with open(file, "r", encoding="utf-8") as handle:
            lines = [ln.rstrip("\n") for ln in handle]
    except OSError as err:
        raise ValidationError(f"cannot read report {file}: {err}") from err
    keys: dict[str, str] = {}
    sections: dict[str, list[str]] = {}
    current = None
    for ln in lines:
        if not ln or ln.startswith("#"):
            continue
        if ln.startswith("[") and ln.endswith("]"):
            current = ln[1:-1]
            sections[current] = []
            continue
        if current is None:
            key, _, value = ln.partition(",")
            keys[key] = value
        else:
            sections[current].append(ln)
    try:
        n = int(keys["n"])
        pi = InitialDistribution(_parse_vector(sections["pi_hat"][0]))
        lam = SubIntensityMatrix(
            np.asarray([_parse_vector(r) for r in sections["lambda_hat"]])
        )
        report = FitReport(
            family=keys["family"],
            n=n,
            seed=int(keys["seed"]),
            homogeneous_mode=keys.get("homogeneous_mode", "0") == "1",
            termination=keys.get("termination", ""),
            iterations_used=int(keys.get("iterations_used", "0")),
            beta_hat=float(keys["beta_hat"]) if "beta_hat" in keys else None,
            pi_hat=pi,
            lam_hat=lam,
            keys=keys,
        )
    except (KeyError, IndexError, ValueError, ConfigError) as err:
        raise ValidationError(f"malformed report {file}: {err}") from err
    if pi.n != n or lam.n != n:
        raise ValidationError(f"report {file}: inconsistent dimensions")
    return report


# ---------------------------------------------------------------------------
# truth report (simulate runs), GOF and ECDF output


def format_truth(
    pi: InitialDistribution,
    lam: SubIntensityMatrix,
    family: str,
    beta: float | None,
    seed: int,
    absorption_times,
) -> str:
    lines = [
        "# iphfit ground truth",
        "format,1",
        f"family,{family}",
        f"n,{pi.n}",
        f"seed,{seed}",
    ]
    if beta is not None:
        lines.append(f"beta,{_G17 % beta}")
    lines += ["", "[pi]", _fmt_row(pi.probabilities), "", "[lambda]"]
    lines += [_fmt_row(row) for row in lam.entries]
    lines += ["", "[absorption_times]"]
    lines += [_G17 % v for v in np.asarray(absorption_times, dtype=float)]
    return "\n".join(lines) + "\n"


def read_truth_times(file) -> np.ndarray:
    """Absorption-time block of a simulate run's truth report."""
    try:
        with open(file, "r", encoding="utf-8") as handle:
            lines = [ln.strip() for ln in handle]
    except OSError as err:
        raise ValidationError(f"cannot read truth file {file}: {err}") from err
    try:
        start = lines.index("[absorption_times]") + 1
    except ValueError:
        raise ValidationError(f"{file}: no [absorption_times] block")
    vals = [float(ln) for ln in lines[start:] if ln and not ln.startswith("[")]
    return np.asarray(vals, dtype=float)


def format_gof(d: float, p: float, n_observed: int, n_simulated: int) -> str:
    return (
        "n_observed,n_simulated,d_statistic,p_value\n"
        f"{n_observed},{n_simulated},{_G17 % d},{_G17 % p}\n"
    )


def format_ecdf(observed, simulated) -> str:
    """Both ECDFs on the merged grid of sample values, for plotting."""
    from .gof import SampleSet, ecdf

    obs = SampleSet(np.asarray(observed, dtype=float))
    sim = SampleSet(np.asarray(simulated, dtype=float))
    grid = np.unique(np.concatenate([obs.values, sim.values]))
    fo = ecdf(obs, grid)
    fs = ecdf(sim, grid)
    lines = ["value,ecdf_observed,ecdf_simulated"]
    lines += [
        f"{_G17 % v},{_G17 % a},{_G17 % b}" for v, a, b in zip(grid, fo, fs)
    ]
    return "\n".join(lines) + "\n"


def format_beta_trace(rows) -> str:
    lines = ["step,beta,loglik,grad"]
    for step, beta, ell, grad in rows:
        lines.append(f"{step},{_G17 % beta},{_G17 % ell},{_G17 % grad}")
    return "\n".join(lines) + "\n"


def format_path_dump(paths) -> str:
    """Diagnostic CSV of reconstructed continuous paths."""
    lines = ["path_id,epoch,state,timeline_tag"]
    for idx, p in enumerate(paths):
        for t, x in zip(p.times, p.states):
            lines.append(f"p{idx},{_G17 % t},{int(x)},{p.timeline}")
    return "\n".join(lines) + "\n"
