VERSION = (0, 1, 0)
__version__ = '.'.join(str(v) for v in VERSION)
