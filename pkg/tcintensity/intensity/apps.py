from django.apps import AppConfig


class IntensityConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "tcintensity.intensity"
