"""Run directories: config, summary, tables, reports and metadata of one invocation.

Layout of ``<output_dir>/<command>-<hash>/``::

    config.json    canonical config snapshot
    summary.json   verdicts, byte-identical for identical config and seed
    meta.json      version and timestamps
    tables/*.csv
    reports/*.json
    plot/*.dat     written by :func:`emit_plot_data`
"""

import hashlib
import json
import logging
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import pandas as pd
from pydantic import BaseModel

from spectral_lab import __version__

logger = logging.getLogger(__name__)


class RunMeta(BaseModel):
  """Non-deterministic facts about a run, kept apart from the summary."""

  command: str
  run_id: str
  version: str
  started_at: str
  finished_at: str | None = None


def canonical_json(data) -> str:
  """Sorted, indented JSON; the same data always gives the same text."""
  return json.dumps(data, sort_keys=True, indent=2, ensure_ascii=False) + '\n'


def run_id(command: str, config: dict) -> str:
  """``<command>-<first 12 hex digits of sha256(config)>``."""
  compact = json.dumps(config, sort_keys=True, separators=(',', ':'))
  return f'{command}-{hashlib.sha256(compact.encode()).hexdigest()[:12]}'


def _now() -> str:
  return datetime.now(timezone.utc).isoformat(timespec='seconds')


@dataclass
class RunRecord:
  """Everything one command produced."""

  command: str
  config: dict
  summary: dict = field(default_factory=dict)
  tables: dict[str, pd.DataFrame] = field(default_factory=dict)
  reports: dict[str, dict | list] = field(default_factory=dict)
  meta: RunMeta | None = None

  def __post_init__(self):
    if self.meta is None:
      self.meta = RunMeta(
        command=self.command,
        run_id=run_id(self.command, self.config),
        version=__version__,
        started_at=_now(),
      )

  @property
  def run_id(self) -> str:
    """Directory name of the run."""
    return self.meta.run_id

  def is_empty(self) -> bool:
    """Whether the run produced no table rows."""
    return all(frame.empty for frame in self.tables.values())

  def add_report(self, name: str, report: BaseModel | dict | list) -> None:
    """Attach a per-operation report; pydantic models are dumped to JSON form."""
    self.reports[name] = report.model_dump(mode='json') if isinstance(report, BaseModel) else report

  def finish(self) -> None:
    """Stamp the end time."""
    self.meta.finished_at = _now()


def write_run(run: RunRecord, output_dir: str | Path) -> Path:
  """Persist a run under ``output_dir`` and return its directory."""
  if run.meta.finished_at is None:
    run.finish()
  root = Path(output_dir) / run.run_id
  (root / 'tables').mkdir(parents=True, exist_ok=True)
  (root / 'reports').mkdir(exist_ok=True)
  (root / 'config.json').write_text(canonical_json(run.config))
  (root / 'summary.json').write_text(canonical_json(run.summary))
  (root / 'meta.json').write_text(run.meta.model_dump_json(indent=2) + '\n')
  for name, frame in run.tables.items():
    frame.to_csv(root / 'tables' / f'{name}.csv', index=False)
  for name, report in run.reports.items():
    (root / 'reports' / f'{name}.json').write_text(canonical_json(report))
  logger.info('run written to %s', root)
  return root


def load_run(run_dir: str | Path) -> RunRecord:
  """Read a run directory back into a :class:`RunRecord`."""
  root = Path(run_dir)
  if not (root / 'meta.json').is_file():
    raise FileNotFoundError(f'{root} is not a run directory (no meta.json)')
  meta = RunMeta.model_validate_json((root / 'meta.json').read_text())
  tables = {p.stem: pd.read_csv(p) for p in sorted((root / 'tables').glob('*.csv'))}
  reports = {
    p.stem: json.loads(p.read_text()) for p in sorted((root / 'reports').glob('*.json'))
  }
  return RunRecord(
    command=meta.command,
    config=json.loads((root / 'config.json').read_text()),
    summary=json.loads((root / 'summary.json').read_text()),
    tables=tables,
    reports=reports,
    meta=meta,
  )


def _write_dat(path: Path, frame: pd.DataFrame) -> Path:
  header = '# ' + ' '.join(str(c) for c in frame.columns) + '\n'
  path.write_text(header + frame.to_csv(sep=' ', index=False, header=False))
  return path


def _trajectory_frames(run: RunRecord) -> dict[int, pd.DataFrame]:
  """Per eigenvalue index: s columns, then one column per seed."""
  seeds = sorted(
    (name for name in run.tables if name.startswith('trajectories_seed')),
    key=lambda name: int(name.removeprefix('trajectories_seed')),
  )
  if not seeds:
    return {}
  first = run.tables[seeds[0]]
  s_cols = [c for c in first.columns if c.startswith('s')]
  lambdas = [c for c in first.columns if c.startswith('lambda_')]
  out = {}
  for col in lambdas:
    frame = first[s_cols].copy()
    for name in seeds:
      frame[name.removeprefix('trajectories_')] = run.tables[name][col].to_numpy()
    out[int(col.removeprefix('lambda_'))] = frame
  return out


def emit_plot_data(run: RunRecord, run_dir: str | Path) -> list[Path]:
  """Write gnuplot-ready whitespace tables into ``<run_dir>/plot``.

  noncross runs give ``trajectory_XX.dat`` per eigenvalue index; perturb runs give
  ``deviation.dat`` with columns t and deviation for t > 0. Empty runs write nothing.
  """
  if run.is_empty():
    logger.info('run %s has no data to plot', run.run_id)
    return []
  plot_dir = Path(run_dir) / 'plot'
  written = []
  if run.command == 'noncross':
    frames = _trajectory_frames(run)
    if frames:
      plot_dir.mkdir(exist_ok=True)
    for index, frame in frames.items():
      written.append(_write_dat(plot_dir / f'trajectory_{index:02d}.dat', frame))
  elif run.command == 'perturb' and 'first_order' in run.tables:
    frame = run.tables['first_order'][['t', 'deviation']]
    frame = frame[frame['t'] > 0]
    if not frame.empty:
      plot_dir.mkdir(exist_ok=True)
      written.append(_write_dat(plot_dir / 'deviation.dat', frame))
  logger.info('wrote %d plot files for %s', len(written), run.run_id)
  return written
