# -*- coding: utf-8 -*-
# ----------------------------------------------------------------------------
# $Id$
# ----------------------------------------------------------------------------
#
#    Copyright (C) 2009-2010 Caktus Consulting Group, LLC
#
#    This file is part of django-chdg.
#
#    django-chdg is published under a BSD-style license.
#
#    You should have received a copy of the BSD License along with django-chdg.
#    If not, see <http://www.opensource.org/licenses/bsd-license.php>.
#
"""
Run configuration: a flat JSON object validated by ConfigForm.
"""
import json
import logging
from dataclasses import asdict, dataclass

from django import forms

from chdg import dg, operators
from chdg.exceptions import ConfigError, InterfaceError
from chdg.interface import make_initial, parse_shape
from chdg.stepper import ModelParams

logger = logging.getLogger(__name__)

TEST_CASES = ('1', '2', '3', 'custom')

DEFAULTS = {
    'epsilon': 0.1,
    'sigma0': None,
    'degree': 1,
    'scheme': 'splitting',
    'newton_tol': 1e-10,
    'newton_max_iter': 50,
    'init_projection': 'l2_continuous',
    'test_case': 1,
    'custom_interface': None,
    'dump_every': 10,
    'output_dir': 'output',
    'n_list': None,
    'reference_n': None,
    'snapshot_time': 0.0,
    'epsilon_list': None,
    'sweep_times': None,
}


class IntegerListField(forms.Field):
    """
    Accepts a JSON list of integers or a comma separated string.
    """

    def to_python(self, value):
        if value in self.empty_values:
            return None
        if isinstance(value, str):
            value = [v for v in value.replace('[', '').replace(']', '').split(',') if v.strip()]
        try:
            items = [int(v) for v in value]
        except (TypeError, ValueError):
            raise forms.ValidationError('Enter a list of whole numbers.')
        if any(str(v).strip() not in (str(i), '%d.0' % i) for v, i in zip(value, items)):
            raise forms.ValidationError('Enter a list of whole numbers.')
        return tuple(items)


class FloatListField(forms.Field):
    def to_python(self, value):
        if value in self.empty_values:
            return None
        if isinstance(value, str):
            value = [v for v in value.replace('[', '').replace(']', '').split(',') if v.strip()]
        try:
            items = tuple(float(v) for v in value)
        except (TypeError, ValueError):
            raise forms.ValidationError('Enter a list of numbers.')
        if not items:
            return None
        return items


class ConfigForm(forms.Form):
    epsilon = forms.FloatField(required=False)
    k = forms.FloatField()
    T = forms.FloatField()
    sigma0 = forms.FloatField(required=False)
    degree = forms.IntegerField(required=False, min_value=1, max_value=6)
    scheme = forms.ChoiceField(
        required=False, choices=[(s, s) for s in dg.SCHEMES],
    )
    newton_tol = forms.FloatField(required=False)
    newton_max_iter = forms.IntegerField(required=False, min_value=1)
    init_projection = forms.ChoiceField(
        required=False, choices=[(p, p) for p in operators.PROJECTIONS],
    )
    n = forms.IntegerField(min_value=1)
    test_case = forms.CharField(required=False)
    custom_interface = forms.CharField(required=False)
    dump_every = forms.IntegerField(required=False, min_value=1)
    output_dir = forms.CharField(required=False)
    n_list = IntegerListField(required=False)
    reference_n = forms.IntegerField(required=False, min_value=1)
    snapshot_time = forms.FloatField(required=False, min_value=0)
    epsilon_list = FloatListField(required=False)
    sweep_times = FloatListField(required=False)

    def __init__(self, *args, **kwargs):
        self.strict = kwargs.pop('strict', False)
        super().__init__(*args, **kwargs)

    def _positive(self, name):
        value = self.cleaned_data.get(name)
        if value is not None and not value > 0:
            raise forms.ValidationError('%s must be positive.' % name)
        return value

    def clean_epsilon(self):
        return self._positive('epsilon')

    def clean_k(self):
        return self._positive('k')

    def clean_T(self):
        value = self.cleaned_data.get('T')
        if value is not None and value < 0:
            raise forms.ValidationError('T must not be negative.')
        return value

    def clean_sigma0(self):
        return self._positive('sigma0')

    def clean_newton_tol(self):
        return self._positive('newton_tol')

    def clean_epsilon_list(self):
        value = self.cleaned_data.get('epsilon_list')
        if value and any(not e > 0 for e in value):
            raise forms.ValidationError('epsilon_list entries must be positive.')
        return value

    def clean_sweep_times(self):
        value = self.cleaned_data.get('sweep_times')
        if value and any(t < 0 for t in value):
            raise forms.ValidationError('sweep_times must not be negative.')
        return value

    def clean_test_case(self):
        value = self.cleaned_data.get('test_case')
        if value in (None, ''):
            return None
        if value not in TEST_CASES:
            raise forms.ValidationError(
                'test_case must be one of %s.' % ', '.join(TEST_CASES)
            )
        return value if value == 'custom' else int(value)

    def clean_custom_interface(self):
        value = self.cleaned_data.get('custom_interface')
        if not value:
            return None
        try:
            parse_shape(value)
        except InterfaceError as e:
            raise forms.ValidationError(str(e))
        return value

    def clean(self):
        cleaned_data = super().clean()
        unknown = sorted(set(self.data) - set(self.fields))
        for key in unknown:
            self.add_error(None, 'unknown key %r' % key)
        for name, default in DEFAULTS.items():
            if cleaned_data.get(name) in (None, '') and name not in self.errors:
                cleaned_data[name] = default
        if cleaned_data.get('sigma0') is None and cleaned_data.get('degree'):
            cleaned_data['sigma0'] = dg.default_penalty(cleaned_data['degree'])

        if cleaned_data.get('test_case') == 'custom' and not cleaned_data.get('custom_interface'):
            self.add_error('custom_interface', 'custom test case needs custom_interface.')

        n_list = cleaned_data.get('n_list')
        if n_list:
            if any(n < 1 for n in n_list):
                self.add_error('n_list', 'n_list entries must be positive.')
            elif any(b <= a or b % a for a, b in zip(n_list, n_list[1:])):
                self.add_error('n_list', 'n_list must be increasing with each entry dividing the next.')
            elif cleaned_data.get('reference_n') is None:
                cleaned_data['reference_n'] = 2 * max(n_list)
            elif cleaned_data['reference_n'] != 2 * max(n_list):
                self.add_error('reference_n', 'reference_n must be 2*max(n_list) = %d.'
                               % (2 * max(n_list)))

        k, epsilon = cleaned_data.get('k'), cleaned_data.get('epsilon')
        if cleaned_data.get('scheme') == 'implicit' and k and epsilon and k > epsilon ** 3:
            message = 'k exceeds epsilon^3 (k=%g, epsilon^3=%g)' % (k, epsilon ** 3)
            if self.strict:
                self.add_error('k', message)
            else:
                logger.warning(message)
        return cleaned_data


@dataclass(frozen=True)
class Config:
    epsilon: float
    k: float
    T: float
    sigma0: float
    degree: int
    scheme: str
    newton_tol: float
    newton_max_iter: int
    init_projection: str
    n: int
    test_case: object
    custom_interface: str
    dump_every: int
    output_dir: str
    n_list: tuple
    reference_n: int
    snapshot_time: float
    epsilon_list: tuple
    sweep_times: tuple

    def model_params(self, **changes):
        values = dict(
            epsilon=self.epsilon, k=self.k, T=self.T, sigma0=self.sigma0,
            degree=self.degree, scheme=self.scheme, newton_tol=self.newton_tol,
            newton_max_iter=self.newton_max_iter,
            init_projection=self.init_projection,
        )
        values.update(changes)
        return ModelParams(**values)

    def initial_condition(self):
        return make_initial(self.test_case, self.epsilon, self.custom_interface)


def _error_messages(form):
    messages = []
    for name, errors in form.errors.items():
        for error in errors:
            messages.append(error if name == '__all__' else '%s: %s' % (name, error))
    return messages


def parse_override(text):
    """
    ``key=value`` with the value read as JSON when possible.
    """
    key, sep, raw = text.partition('=')
    if not sep or not key.strip():
        raise ConfigError('malformed override %r, expected key=value' % text)
    try:
        value = json.loads(raw)
    except ValueError:
        value = raw
    return key.strip(), value


def read_config_file(path):
    try:
        with open(path) as f:
            data = json.load(f)
    except OSError as e:
        raise ConfigError('cannot read config file %s: %s' % (path, e.strerror or e))
    except ValueError as e:
        raise ConfigError('malformed config file %s: %s' % (path, e))
    if not isinstance(data, dict):
        raise ConfigError('config file %s must hold a JSON object' % path)
    return data


def parse_config(path=None, overrides=(), strict=False, data=None):
    """
    Build a validated Config from a JSON file and ``key=value`` overrides;
    every validation problem is reported in one ConfigError.
    """
    values = dict(data or {})
    if path:
        values.update(read_config_file(path))
    errors = []
    for text in overrides:
        try:
            key, value = parse_override(text)
        except ConfigError as e:
            errors.extend(e.errors)
            continue
        values[key] = value
    form = ConfigForm(values, strict=strict)
    if not form.is_valid():
        errors.extend(_error_messages(form))
    if errors:
        raise ConfigError(errors)
    cleaned = form.cleaned_data
    return Config(**{name: cleaned.get(name) for name in Config.__dataclass_fields__})


def emit_config(config):
    """
    JSON-ready dict that parses back to an equal Config.
    """
    data = asdict(config)
    for name in ('n_list', 'epsilon_list', 'sweep_times'):
        if data[name] is not None:
            data[name] = list(data[name])
    if data['test_case'] != 'custom':
        data['test_case'] = int(data['test_case'])
    return {key: value for key, value in data.items() if value is not None}
