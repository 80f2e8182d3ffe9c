import os

import django

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'risklab_project.settings')
django.setup()
