from sample_project.settings import *

# solver chatter is kept out of test output
LOGGING['loggers']['chdg']['level'] = 'WARNING'

CHDG_THREADS = 2
