from django.apps import AppConfig


class FractalInterpConfig(AppConfig):
    name = 'fractal_interp'
    verbose_name = 'Fractal interpolation'
