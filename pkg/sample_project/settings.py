# Django settings for sample_project project.
import os.path
PROJECT_PATH = os.path.abspath('%s' % os.path.dirname(__file__))

from chdg.settings import *

import copy
LOGGING = copy.deepcopy(LOGGING)

DEBUG = True

# Make this unique, and don't share it with anybody.
SECRET_KEY = 'sample-project'

INSTALLED_APPS = (
    'chdg',
)

# Worker cap for convergence studies; None uses every CPU.
CHDG_THREADS = None

LOGGING['loggers']['chdg']['level'] = 'DEBUG' if os.environ.get('CHDG_DEBUG') else 'INFO'
