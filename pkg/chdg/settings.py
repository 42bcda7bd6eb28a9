# Settings used by the ``chdg`` console script when no project is configured.
SECRET_KEY = 'chdg-cli'

DEBUG = False

USE_TZ = True

INSTALLED_APPS = (
    'chdg',
)

DATABASES = {}

# Upper bound on concurrent runs in convergence studies; the CHDG_THREADS
# environment variable lowers it further.
CHDG_THREADS = None

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'simple': {
            'format': '%(asctime)s %(levelname)s %(name)s: %(message)s',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'simple',
        },
    },
    'loggers': {
        'chdg': {
            'handlers': ['console'],
            'level': 'INFO',
        },
    },
}
