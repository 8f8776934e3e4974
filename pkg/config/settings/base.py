# ruff: noqa: E501
"""Base settings to build other settings files upon."""

from pathlib import Path

import environ

BASE_DIR = Path(__file__).resolve(strict=True).parent.parent.parent
# tcintensity/
APPS_DIR = BASE_DIR / "tcintensity"
env = environ.Env()

READ_DOT_ENV_FILE = env.bool("DJANGO_READ_DOT_ENV_FILE", default=False)
if READ_DOT_ENV_FILE:
    # OS environment variables take precedence over variables from .env
    env.read_env(str(BASE_DIR / ".env"))

# GENERAL
# ------------------------------------------------------------------------------
# https://docs.djangoproject.com/en/dev/ref/settings/#debug
DEBUG = env.bool("DJANGO_DEBUG", False)
# Track times are read and written in UTC.
TIME_ZONE = "UTC"
# https://docs.djangoproject.com/en/dev/ref/settings/#language-code
LANGUAGE_CODE = "en-us"
# https://docs.djangoproject.com/en/dev/ref/settings/#use-i18n
USE_I18N = False
# https://docs.djangoproject.com/en/dev/ref/settings/#use-tz
USE_TZ = True

# DATABASES
# ------------------------------------------------------------------------------
# Every artifact is a file; the database is never touched.
DATABASES = {
    "default": {
        "ENGINE": "django.db.backends.sqlite3",
        "NAME": ":memory:",
    },
}
# https://docs.djangoproject.com/en/stable/ref/settings/#std:setting-DEFAULT_AUTO_FIELD
DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"

# APPS
# ------------------------------------------------------------------------------
LOCAL_APPS = [
    "tcintensity.storms",
    "tcintensity.intensity",
    "tcintensity.ensembles",
]
# https://docs.djangoproject.com/en/dev/ref/settings/#installed-apps
INSTALLED_APPS = LOCAL_APPS

# LOGGING
# ------------------------------------------------------------------------------
# https://docs.djangoproject.com/en/dev/ref/settings/#logging
# See https://docs.djangoproject.com/en/dev/topics/logging for
# more details on how to customize your logging configuration.
LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "verbose": {
            "format": "%(levelname)s %(asctime)s %(module)s %(process)d %(thread)d %(message)s",
        },
    },
    "handlers": {
        "console": {
            "level": "DEBUG",
            "class": "logging.StreamHandler",
            "formatter": "verbose",
        },
    },
    "root": {"level": "WARNING", "handlers": ["console"]},
    "loggers": {
        "tcintensity": {
            "level": env("TC_LOG_LEVEL", default="INFO"),
            "handlers": ["console"],
            "propagate": False,
        },
    },
}

# tcintensity
# ------------------------------------------------------------------------------
# Share of the translation speed removed from the reported wind.
TC_BG_FRACTION = env.float("TC_BG_FRACTION", default=0.55)
# Floors that keep the ocean coupling term finite (K per 100 m, kt).
TC_GAMMA_FLOOR = env.float("TC_GAMMA_FLOOR", default=0.01)
TC_V_FLOOR = env.float("TC_V_FLOOR", default=5.0)
# Segmentation of tracks into ocean sequences and land segments.
TC_MIN_OCEAN_LEN = env.int("TC_MIN_OCEAN_LEN", default=12)
TC_MIN_LAND_LEN = env.int("TC_MIN_LAND_LEN", default=2)
TC_MIN_LAND_V0 = env.float("TC_MIN_LAND_V0", default=20.0)
# Fitting.
TC_FIT_RESTARTS = env.int("TC_FIT_RESTARTS", default=10)
TC_FIT_TOL = env.float("TC_FIT_TOL", default=1e-8)
TC_MNL_TOL = env.float("TC_MNL_TOL", default=1e-8)
TC_SIGMA_FLOOR = env.float("TC_SIGMA_FLOOR", default=1e-4)
# Simulation.
TC_N_REALIZATIONS = env.int("TC_N_REALIZATIONS", default=100)
TC_STOP_THRESHOLD = env.float("TC_STOP_THRESHOLD", default=10.0)
TC_SEED = env.int("TC_SEED", default=42)
TC_WORKERS = env.int("TC_WORKERS", default=1)
