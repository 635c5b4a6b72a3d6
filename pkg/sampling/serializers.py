# sampling/serializers.py
from rest_framework import serializers

from .exceptions import ConfigInvariantError
from .models import RunRecord
from .pfdiff import MODES, PFDiffConfig
from .schedule import GRID_KINDS
from .score import PRESET_NAMES
from .solvers import SOLVER_FAMILIES


class StrictSerializer(serializers.Serializer):
    """Rejects keys the schema does not define"""

    def to_internal_value(self, data):
        if isinstance(data, dict):
            unknown = sorted(set(data) - set(self.fields))
            if unknown:
                raise serializers.ValidationError({key: ["Unknown field"] for key in unknown})
        return super().to_internal_value(data)


class ScheduleSerializer(StrictSerializer):
    kind = serializers.ChoiceField(choices=['vp-linear'], default='vp-linear')
    T = serializers.IntegerField(min_value=2, default=1000)
    beta_min = serializers.FloatField(default=1e-4)
    beta_max = serializers.FloatField(default=0.02)

    def validate(self, data):
        if not 0 < data['beta_min'] <= data['beta_max'] < 1:
            raise serializers.ValidationError({'beta_min': ['Need 0 < beta_min <= beta_max < 1']})
        return data


class GridSerializer(StrictSerializer):
    kind = serializers.ChoiceField(choices=GRID_KINDS, default='uniform')


class ModelSourceSerializer(StrictSerializer):
    """Either a named preset or a mixture JSON document"""
    preset = serializers.ChoiceField(choices=PRESET_NAMES, required=False)
    mixture = serializers.CharField(required=False)

    def validate(self, data):
        if not data.get('preset') and not data.get('mixture'):
            raise serializers.ValidationError({'preset': ['Name a preset or give a mixture file']})
        if data.get('preset') and data.get('mixture'):
            raise serializers.ValidationError({'mixture': ['Give either a preset or a mixture file, not both']})
        return data


class SolverSerializer(StrictSerializer):
    family = serializers.ChoiceField(choices=SOLVER_FAMILIES, default='ddim-eta')
    order = serializers.IntegerField(min_value=1, max_value=3, default=1)
    eta = serializers.FloatField(min_value=0.0, max_value=1.0, default=0.0)

    def validate(self, data):
        if data['family'] == 'ddim-eta' and data['order'] != 1:
            raise serializers.ValidationError({'order': ['The DDIM family is first order']})
        if data['family'] == 'dpm-solver' and data['eta'] != 0:
            raise serializers.ValidationError({'eta': ['DPM-Solver steps are deterministic; eta must be 0']})
        return data


class PFDiffSerializer(StrictSerializer):
    enabled = serializers.BooleanField(default=True)
    k = serializers.IntegerField(min_value=1, max_value=3, default=1)
    h = serializers.IntegerField(min_value=1, max_value=3, default=1)
    N = serializers.IntegerField(min_value=2, default=10)
    mode = serializers.ChoiceField(choices=MODES, default='full')


class RunSerializer(StrictSerializer):
    seed = serializers.IntegerField(min_value=0, default=0)
    chains = serializers.IntegerField(min_value=1, default=1000)
    record_trajectories = serializers.BooleanField(default=False)
    n_ref = serializers.IntegerField(min_value=100, required=False)


class ExperimentConfigSerializer(StrictSerializer):
    """Schema of the TOML experiment document"""
    schedule = ScheduleSerializer()
    grid = GridSerializer()
    model = ModelSourceSerializer()
    solver = SolverSerializer()
    pfdiff = PFDiffSerializer()
    run = RunSerializer()

    OPTIONAL_SECTIONS = ('schedule', 'grid', 'solver', 'pfdiff', 'run')

    def to_internal_value(self, data):
        if isinstance(data, dict):
            data = dict(data)
            for section in self.OPTIONAL_SECTIONS:
                data.setdefault(section, {})
        return super().to_internal_value(data)

    def validate(self, data):
        solver, pfdiff, schedule = data['solver'], data['pfdiff'], data['schedule']
        if pfdiff['enabled']:
            try:
                config = PFDiffConfig(k=pfdiff['k'], h=pfdiff['h'], p=solver['order'], N=pfdiff['N'],
                                      mode=pfdiff['mode'], eta=solver['eta'])
            except ConfigInvariantError as exc:
                raise serializers.ValidationError({'pfdiff': [str(exc)]})
            intervals = config.grid_size
        else:
            if pfdiff['N'] % solver['order']:
                raise serializers.ValidationError({'pfdiff': {'N': ['N must be a multiple of the solver order']}})
            intervals = pfdiff['N'] // solver['order']
        if intervals > schedule['T'] - 1:
            raise serializers.ValidationError(
                {'pfdiff': {'N': [f"Needs {intervals} grid intervals but T={schedule['T']} allows {schedule['T'] - 1}"]}}
            )
        return data


class RunManifestSerializer(serializers.ModelSerializer):
    class Meta:
        model = RunRecord
        fields = ['id', 'command', 'options', 'config', 'config_hash', 'seed', 'tool_version',
                  'input_hashes', 'nfe_batches', 'nfe_evals', 'nfe_points', 'outputs', 'summary',
                  'output_dir', 'started_at', 'finished_at', 'elapsed_seconds']
        read_only_fields = ['id']


def flatten_errors(detail, prefix=''):
    """DRF error detail as 'section.field: message' lines"""
    if isinstance(detail, dict):
        lines = []
        for key, value in detail.items():
            path = prefix if key == 'non_field_errors' else f"{prefix}.{key}" if prefix else str(key)
            lines.extend(flatten_errors(value, path))
        return lines
    if isinstance(detail, list):
        lines = []
        for item in detail:
            lines.extend(flatten_errors(item, prefix))
        return lines
    return [f"{prefix}: {detail}" if prefix else str(detail)]
