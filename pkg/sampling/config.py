# sampling/config.py
"""Experiment documents: TOML in, validated settings and solver objects out"""
import hashlib
import json
import logging
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass
from pathlib import Path

from .exceptions import ConfigError, PFDiffError
from .pfdiff import PFDiffConfig
from .schedule import make_grid, make_vp_linear
from .score import build_model
from .serializers import ExperimentConfigSerializer, flatten_errors
from .solvers import SolverStep

logger = logging.getLogger(__name__)


def sha256_bytes(data):
    return hashlib.sha256(data).hexdigest()


def sha256_file(path):
    return sha256_bytes(Path(path).read_bytes())


def canonical_json(data):
    return json.dumps(data, sort_keys=True, separators=(',', ':'))


def parse_config(text, source='<config>'):
    """Validated config dict from TOML text"""
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        # the decoder message carries the line and column
        raise ConfigError(f"{source}: {exc}") from exc
    serializer = ExperimentConfigSerializer(data=raw)
    if not serializer.is_valid():
        raise ConfigError(f"{source}: " + '; '.join(flatten_errors(serializer.errors)))
    return serializer.validated_data


def load_config(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"Cannot read config {path}: {exc.strerror}") from exc
    return parse_config(text, source=str(path))


@dataclass
class Experiment:
    """Objects built from one validated config"""
    config: dict
    schedule: object
    model: object
    phi: SolverStep
    pfdiff: PFDiffConfig
    grid: object
    input_hashes: dict

    @property
    def seed(self):
        return self.config['run']['seed']

    @property
    def chains(self):
        return self.config['run']['chains']

    @property
    def n_ref(self):
        return self.config['run'].get('n_ref')

    @property
    def baseline_grid(self):
        """Grid the plain solver runs at the same evaluation budget"""
        if self.pfdiff is None:
            return self.grid
        N = self.config['pfdiff']['N']
        return make_grid(self.config['grid']['kind'], N // self.phi.order, self.schedule.T)

    @property
    def config_hash(self):
        return sha256_bytes(canonical_json(self.config).encode())

    def as_manifest(self):
        return {
            'schedule': self.schedule.as_manifest(),
            'grid': self.grid.as_manifest(),
            'model': self.config['model'],
            'solver': self.phi.as_manifest(),
            'pfdiff': self.pfdiff.as_manifest() if self.pfdiff else None,
            'run': self.config['run'],
        }


def build_experiment(config, source=None):
    """Schedule, model, solver and grid for a validated config"""
    try:
        sched_cfg, solver_cfg, pfdiff_cfg = config['schedule'], config['solver'], config['pfdiff']
        schedule = make_vp_linear(sched_cfg['T'], sched_cfg['beta_min'], sched_cfg['beta_max'])
        model_cfg = config['model']
        model = build_model(schedule, preset=model_cfg.get('preset'), mixture_path=model_cfg.get('mixture'))
        phi = SolverStep(schedule, solver_cfg['family'], solver_cfg['order'], solver_cfg['eta'])
        if pfdiff_cfg['enabled']:
            pfdiff = PFDiffConfig(k=pfdiff_cfg['k'], h=pfdiff_cfg['h'], p=solver_cfg['order'],
                                  N=pfdiff_cfg['N'], mode=pfdiff_cfg['mode'], eta=solver_cfg['eta'])
            grid = pfdiff.make_grid(config['grid']['kind'], schedule.T)
        else:
            pfdiff = None
            grid = make_grid(config['grid']['kind'], pfdiff_cfg['N'] // solver_cfg['order'], schedule.T)
    except PFDiffError as exc:
        raise ConfigError(str(exc)) from exc

    input_hashes = {}
    if source:
        input_hashes['config'] = sha256_file(source)
    if config['model'].get('mixture'):
        input_hashes['mixture'] = sha256_file(config['model']['mixture'])
    logger.debug('Built experiment: %r, %r, %r', model, phi, grid)
    return Experiment(config=dict(config), schedule=schedule, model=model, phi=phi, pfdiff=pfdiff,
                      grid=grid, input_hashes=input_hashes)


def load_experiment(path):
    return build_experiment(load_config(path), source=path)
