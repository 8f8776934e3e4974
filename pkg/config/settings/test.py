"""
With these settings, tests run faster.
"""

from .base import *  # noqa: F403
from .base import LOGGING
from .base import env

# GENERAL
# ------------------------------------------------------------------------------
# https://docs.djangoproject.com/en/dev/ref/settings/#secret-key
SECRET_KEY = env(
    "DJANGO_SECRET_KEY",
    default="JomiR6q4vpPvLyVd5e1tU9vKGv8DwlXte0YwFK258TOO7QHBEalexaylstYA4uUa",
)
# https://docs.djangoproject.com/en/dev/ref/settings/#test-runner
TEST_RUNNER = "django.test.runner.DiscoverRunner"

# LOGGING
# ------------------------------------------------------------------------------
LOGGING["loggers"]["tcintensity"]["level"] = "DEBUG"  # type: ignore[index]
# Let pytest's caplog see package records.
LOGGING["loggers"]["tcintensity"]["propagate"] = True  # type: ignore[index]

# tcintensity
# ------------------------------------------------------------------------------
# Small ensembles and few restarts keep command tests fast.
TC_N_REALIZATIONS = 5
TC_FIT_RESTARTS = 2
TC_SEED = 7
TC_WORKERS = 1
