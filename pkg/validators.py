"""
Data validation schemas and utilities
"""
import math

from marshmallow import EXCLUDE, Schema, ValidationError, fields, validate, validates_schema

from config import AUDIT_CONFIG, RUNTIME_CONFIG, SOLVER_CONFIG

UINT64_MAX = 2 ** 64 - 1
BASIN_SIN = math.sin(math.pi / 8)

STUDY_NAMES = [
    'decrement-curve', 'escape-prob', 'rate-vs-n', 'linear-baseline',
    'init-quality', 'arbitrary-init', 'acw-vs-m',
]

positive = validate.Range(min=0, min_inclusive=False)
seed_range = validate.Range(min=0, max=UINT64_MAX)


class InstanceFileSchema(Schema):
    """Validation schema for instance files"""
    schema_version = fields.Integer(required=True, validate=validate.Equal(1))
    n = fields.Integer(required=True, validate=validate.Range(min=1))
    m = fields.Integer(required=True, validate=validate.Range(min=1))
    generator = fields.Str(required=True)
    seed = fields.Integer(allow_none=True, validate=seed_range, load_default=None)
    rows = fields.List(fields.List(fields.Float(allow_nan=False)), required=True)
    magnitudes = fields.List(fields.Float(allow_nan=False, validate=validate.Range(min=0)),
                             required=True)
    signal = fields.List(fields.Float(allow_nan=False), allow_none=True, load_default=None)

    @validates_schema
    def check_lengths(self, data, **kwargs):
        if len(data['rows']) != data['m']:
            raise ValidationError(f"expected {data['m']} rows", 'rows')
        if any(len(row) != data['n'] for row in data['rows']):
            raise ValidationError(f"every row needs {data['n']} entries", 'rows')
        if len(data['magnitudes']) != data['m']:
            raise ValidationError(f"expected {data['m']} magnitudes", 'magnitudes')
        if data.get('signal') is not None and len(data['signal']) != data['n']:
            raise ValidationError(f"signal needs {data['n']} entries", 'signal')


class CommonSchema(Schema):
    """Flags shared by every subcommand"""
    class Meta:
        unknown = EXCLUDE

    seed = fields.Integer(load_default=0, validate=seed_range)
    threads = fields.Integer(load_default=RUNTIME_CONFIG['threads'], validate=validate.Range(min=-1))
    out = fields.Str(load_default=None, allow_none=True)
    config = fields.Str(load_default=None, allow_none=True)

    @validates_schema
    def check_threads(self, data, **kwargs):
        if data.get('threads') == 0:
            raise ValidationError("threads must be -1 (all cores) or positive", 'threads')


class GenerateSchema(CommonSchema):
    """Validation schema for instance generation"""
    n = fields.Integer(required=True, validate=validate.Range(min=1))
    m = fields.Integer(load_default=None, allow_none=True, validate=validate.Range(min=1))
    generator = fields.Str(load_default='uniform', validate=validate.OneOf(['uniform', 'gaussian']))
    signal_norm = fields.Float(load_default=1.0, validate=positive)
    no_signal = fields.Boolean(load_default=False)


class SolveSchema(CommonSchema):
    """Validation schema for single solves"""
    instance = fields.Str(required=True)
    K = fields.Integer(load_default=None, allow_none=True, validate=validate.Range(min=0))
    eps = fields.Float(load_default=SOLVER_CONFIG['eps'],
                       validate=validate.Range(min=0, max=1, min_inclusive=False, max_inclusive=False))
    delta2 = fields.Float(load_default=SOLVER_CONFIG['delta2'],
                          validate=validate.Range(min=0, max=1, min_inclusive=False))
    init = fields.Str(load_default='spectral', validate=validate.OneOf(['spectral', 'given', 'random']))
    x0 = fields.Str(load_default=None, allow_none=True)
    selector = fields.Str(load_default=SOLVER_CONFIG['selector'],
                          validate=validate.OneOf(['uniform', 'squared-norm']))

    @validates_schema
    def check_init(self, data, **kwargs):
        if data.get('init') == 'given' and not data.get('x0'):
            raise ValidationError("--init given needs --x0", 'x0')


class EnsembleSchema(SolveSchema):
    """Validation schema for ensemble runs"""
    L = fields.Integer(load_default=16, validate=validate.Range(min=1))
    radius = fields.Float(load_default=None, allow_none=True, validate=positive)
    rho = fields.Float(load_default=None, allow_none=True, validate=positive)
    delta1 = fields.Float(load_default=SOLVER_CONFIG['ensemble_delta1'],
                          validate=validate.Range(min=0, max=0.5, min_inclusive=False))

    @validates_schema
    def check_failure_budget(self, data, **kwargs):
        if data['delta1'] + data['delta2'] > 1 / 3:
            raise ValidationError("ensemble runs need delta1 + delta2 <= 1/3", 'delta1')


class AuditSchema(CommonSchema):
    """Validation schema for ACW audits"""
    instance = fields.Str(required=True)
    theta = fields.Float(required=True,
                         validate=validate.Range(min=0, max=math.pi / 2, min_inclusive=False,
                                                 max_inclusive=False))
    alpha = fields.Float(load_default=AUDIT_CONFIG['alpha_target'], validate=positive)
    wedges = fields.Integer(load_default=AUDIT_CONFIG['num_wedges'], validate=validate.Range(min=1))
    refine = fields.Boolean(load_default=False)


class StudySchema(CommonSchema):
    """Validation schema for Monte Carlo studies"""
    name = fields.Str(required=True, validate=validate.OneOf(STUDY_NAMES))
    n = fields.List(fields.Integer(validate=validate.Range(min=1)), load_default=None, allow_none=True)
    m = fields.List(fields.Integer(validate=validate.Range(min=1)), load_default=None, allow_none=True)
    K = fields.Integer(load_default=None, allow_none=True, validate=validate.Range(min=0))
    trials = fields.Integer(load_default=100, validate=validate.Range(min=1))
    draws = fields.Integer(load_default=100000, validate=validate.Range(min=1))
    delta = fields.List(fields.Float(validate=validate.Range(min=0, max=BASIN_SIN, max_inclusive=False)),
                        load_default=None, allow_none=True)
    theta = fields.List(fields.Float(validate=validate.Range(min=0, max=math.pi / 2,
                                                             min_inclusive=False, max_inclusive=False)),
                        load_default=None, allow_none=True)
    eps = fields.Float(load_default=1e-4,
                       validate=validate.Range(min=0, max=1, min_inclusive=False, max_inclusive=False))
    wedges = fields.Integer(load_default=200, validate=validate.Range(min=1))


class Validator:
    """Centralized validation utilities"""

    def __init__(self):
        self.instance_schema = InstanceFileSchema()
        self.command_schemas = {
            'gen': GenerateSchema(),
            'solve': SolveSchema(),
            'ensemble': EnsembleSchema(),
            'acw-audit': AuditSchema(),
            'study': StudySchema(),
        }

    def validate_instance(self, data):
        """Validate a parsed instance file"""
        try:
            return self.instance_schema.load(data), None
        except ValidationError as err:
            return None, err.messages

    def validate_command(self, command, data):
        """Validate and complete the config for one subcommand"""
        try:
            return self.command_schemas[command].load(data), None
        except ValidationError as err:
            return None, err.messages
