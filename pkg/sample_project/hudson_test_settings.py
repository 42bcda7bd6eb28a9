import os

from sample_project.test_settings import *

# CI also runs the full-size verification runs
os.environ.setdefault('CHDG_ACCEPTANCE', '1')

TEST_RUNNER = 'xmlrunner.extra.djangotestrunner.XMLTestRunner'
TEST_OUTPUT_VERBOSE = 2
TEST_OUTPUT_DESCRIPTIONS = True
TEST_OUTPUT_DIR = 'xmlrunner'
