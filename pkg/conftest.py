"""pytest wiring: configure Django the same way manage.py does before collecting tests."""
import os

import django

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'fractal_project.settings')
django.setup()
