# sampling/runner.py
"""
Seeded chain execution and run artifacts.

Chains run in contiguous blocks on a thread pool. Each chain owns the
generator spawned for its id, so block boundaries never change a draw. All
files go through one RunWriter after the workers join.
"""
import csv
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
from django.conf import settings
from django.db import DatabaseError
from django.utils import timezone

import pfdiffkit

from .config import canonical_json, sha256_bytes, sha256_file
from .models import RunRecord
from .pfdiff import pfdiff_sample
from .records import SampleResult, TrajectoryRecord
from .serializers import RunManifestSerializer
from .solvers import baseline_sample, seed_chains

logger = logging.getLogger(__name__)

# bump when a table's columns change
SCHEMA_VERSIONS = {
    'endpoints': 1,
    'trajectory': 1,
    'mse-dt': 1,
    'springboard': 2,
    'truncation': 1,
    'planarity': 1,
    'eta-sweep': 1,
    'convergence': 1,
    'search': 1,
    'prop1': 1,
    'prop1-summary': 1,
    'metric-summary': 1,
}

MANIFEST_NAME = 'manifest.json'


def chain_blocks(n_chains, workers):
    """Contiguous (first_chain, size) blocks, one per worker"""
    workers = max(1, min(int(workers), n_chains))
    return [(int(block[0]), len(block)) for block in np.array_split(np.arange(n_chains), workers)]


def _run_block(experiment, seed, first_chain, size, use_pfdiff):
    x_T, noise, chain_ids = seed_chains(seed, size, experiment.model.dim, first_chain=first_chain)
    if use_pfdiff:
        return pfdiff_sample(experiment.pfdiff, experiment.phi, experiment.model, experiment.schedule,
                             experiment.grid, x_T, noise, chain_ids)
    return baseline_sample(experiment.phi, experiment.model, experiment.baseline_grid, x_T, noise, chain_ids)


def run_chains(experiment, seed, n_chains, workers=1, use_pfdiff=None):
    """Run n_chains seeded chains; returns the merged SampleResult and the point count"""
    use_pfdiff = experiment.pfdiff is not None if use_pfdiff is None else use_pfdiff
    model = experiment.model
    before = model.call_count
    blocks = chain_blocks(n_chains, workers)
    with ThreadPoolExecutor(max_workers=len(blocks)) as pool:
        futures = [pool.submit(_run_block, experiment, seed, first, size, use_pfdiff) for first, size in blocks]
        results = [future.result() for future in futures]
    nfe_points = model.call_count - before

    head = results[0]
    trajectory = TrajectoryRecord(
        times=head.trajectory.times,
        states=np.concatenate([r.trajectory.states for r in results], axis=1),
        chain_ids=np.concatenate([r.trajectory.chain_ids for r in results]),
        grid=head.trajectory.grid,
        meta=head.trajectory.meta,
    )
    merged = SampleResult(
        x_0=np.concatenate([r.x_0 for r in results]),
        trajectory=trajectory,
        nfe_batches=head.nfe_batches,
        nfe_evals=head.nfe_evals,
    )
    logger.info('Ran %d chains in %d blocks: %d batches, %d points', n_chains, len(blocks),
                merged.nfe_batches, nfe_points)
    return merged, nfe_points


def format_cell(value):
    """CSV cell text; floats keep round-trip precision"""
    if value is None:
        return ''
    if isinstance(value, (bool, np.bool_)):
        return 'true' if value else 'false'
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def state_columns(dim):
    return [f"x_{d}" for d in range(dim)]


def endpoint_rows(chain_ids, x_0):
    return [
        {'chain_id': chain, **dict(zip(state_columns(len(x)), x))}
        for chain, x in zip(chain_ids, x_0)
    ]


def trajectory_rows(record):
    columns = state_columns(record.dim)
    rows = []
    for c, chain in enumerate(record.chain_ids):
        for step, t in enumerate(record.times):
            rows.append({'chain_id': chain, 'step_index': step, 't': t,
                         **dict(zip(columns, record.states[step, c]))})
    return rows


class RunWriter:
    """Single writer for every file of one run"""

    def __init__(self, out_dir):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.outputs = []

    def _register(self, path, schema):
        self.outputs.append({
            'path': path.name,
            'schema': schema,
            'schema_version': SCHEMA_VERSIONS[schema],
            'sha256': sha256_file(path),
        })
        logger.debug('Wrote %s', path)
        return path

    def write_csv(self, name, schema, fieldnames, rows):
        path = self.out_dir / name
        with path.open('w', newline='') as fh:
            writer = csv.DictWriter(fh, fieldnames=fieldnames, lineterminator='\n')
            writer.writeheader()
            for row in rows:
                writer.writerow({key: format_cell(row.get(key)) for key in fieldnames})
        return self._register(path, schema)

    def write_json(self, name, schema, data):
        path = self.out_dir / name
        path.write_text(json.dumps(data, indent=2, sort_keys=True) + '\n')
        return self._register(path, schema)

    def write_endpoints(self, result):
        fieldnames = ['chain_id'] + state_columns(result.x_0.shape[1])
        return self.write_csv('endpoints.csv', 'endpoints', fieldnames,
                              endpoint_rows(result.trajectory.chain_ids, result.x_0))

    def write_trajectory(self, record, name='trajectory.csv'):
        fieldnames = ['chain_id', 'step_index', 't'] + state_columns(record.dim)
        return self.write_csv(name, 'trajectory', fieldnames, trajectory_rows(record))


def run_directory(command, key, seed):
    """Default output directory; the same inputs always land in the same place"""
    suffix = '' if seed is None else f"-s{seed}"
    return Path(settings.PFDIFF_OUTPUT_DIR) / f"{command}-{key[:12]}{suffix}"


def options_key(options):
    return sha256_bytes(canonical_json(options).encode())


def record_run(command, replay, writer, started_at, experiment=None, seed=None, nfe=None, summary=None,
               input_hashes=None):
    """Save the RunRecord and write the manifest next to the outputs"""
    finished_at = timezone.now()
    nfe = nfe or {}
    hashes = dict(experiment.input_hashes) if experiment else {}
    hashes.update(input_hashes or {})
    record = RunRecord(
        command=command,
        options=replay,
        config=experiment.as_manifest() if experiment else {},
        config_hash=experiment.config_hash if experiment else options_key(replay),
        seed=seed,
        tool_version=pfdiffkit.__version__,
        input_hashes=hashes,
        nfe_batches=nfe.get('batches'),
        nfe_evals=nfe.get('evals'),
        nfe_points=nfe.get('points'),
        outputs=writer.outputs,
        summary=summary or {},
        output_dir=str(writer.out_dir),
        started_at=started_at,
        finished_at=finished_at,
        elapsed_seconds=(finished_at - started_at).total_seconds(),
    )
    try:
        record.save()
    except DatabaseError as exc:
        logger.warning('Run registry unavailable, manifest written to disk only: %s', exc)

    manifest = RunManifestSerializer(record).data
    path = writer.out_dir / MANIFEST_NAME
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + '\n')
    return record, path
