from django.apps import AppConfig


class StormsConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "tcintensity.storms"
