from .base import *  # noqa: F403
from .base import INSTALLED_APPS
from .base import env

# GENERAL
# ------------------------------------------------------------------------------
# https://docs.djangoproject.com/en/dev/ref/settings/#debug
DEBUG = True
# https://docs.djangoproject.com/en/dev/ref/settings/#secret-key
SECRET_KEY = env(
    "DJANGO_SECRET_KEY",
    default="Ee6RfbHB9EK1VCpFo0RjOIOjnhEOCqMfQR1dMlmHyt4YZzdiN3LBJLy6TsGzAutM",
)

# django-extensions
# ------------------------------------------------------------------------------
# https://django-extensions.readthedocs.io/en/latest/installation_instructions.html#configuration
INSTALLED_APPS += ["django_extensions"]

# tcintensity
# ------------------------------------------------------------------------------
TC_WORKERS = env.int("TC_WORKERS", default=4)
