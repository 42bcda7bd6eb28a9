#!/usr/bin/env python

import sys
import os.path

PROJECT_ROOT = os.path.abspath(os.path.dirname(__file__))
sys.path.insert(0, os.path.dirname(PROJECT_ROOT))

if __name__ == "__main__":
    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'sample_project.settings')
    from django.core.management import execute_from_command_line
    execute_from_command_line(sys.argv)
