import os
from pathlib import Path

from dotenv import load_dotenv

load_dotenv()  # take environment variables from .env.

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent.parent


# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = os.getenv("SECRET_KEY", "django-insecure-change-this")
# SECURITY WARNING: don't run with debug turned on in production!
DEBUG = os.getenv("DEBUG", "True") == "True"

ALLOWED_HOSTS = []


# Application definition
# No web surface: the app is driven through management commands only.

INSTALLED_APPS = [
    "django.contrib.contenttypes",
    # My apps
    "lamp.apps.LampConfig",
]


# Database
# https://docs.djangoproject.com/en/6.0/ref/settings/#databases
# Run manifests are the only thing persisted; sqlite is enough on a desk.

DATABASES = {
    "default": {
        "ENGINE": "django.db.backends.sqlite3",
        "NAME": os.getenv("DB_FILE", str(BASE_DIR / "lamp.sqlite3")),
    }
}

DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"


# Internationalization
# https://docs.djangoproject.com/en/6.0/topics/i18n/

LANGUAGE_CODE = "en-us"

TIME_ZONE = "UTC"

USE_I18N = False

USE_TZ = True


# LAMP engine
# Bare dataset names on the command line (e.g. "MUTAG") resolve against this root.
LAMP_DATA_DIR = Path(os.getenv("LAMP_DATA_DIR", str(BASE_DIR / "data")))
# Default root for command outputs when --out is omitted
LAMP_OUTPUT_DIR = Path(os.getenv("LAMP_OUTPUT_DIR", str(BASE_DIR / "runs")))
# Degree one-hot cap for datasets without node labels
LAMP_MAX_DEGREE = int(os.getenv("LAMP_MAX_DEGREE", "128"))
# NaN/Inf check after every taped operation (slow, on by default while debugging)
LAMP_CHECK_FINITE = os.getenv("LAMP_CHECK_FINITE", str(DEBUG)) == "True"
LAMP_LOG_LEVEL = os.getenv("LAMP_LOG_LEVEL", "INFO")


# Logging
# https://docs.djangoproject.com/en/6.0/topics/logging/

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "verbose": {
            "format": "{asctime} {levelname} {name} {message}",
            "style": "{",
        },
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "formatter": "verbose",
        },
    },
    "loggers": {
        "lamp": {
            "handlers": ["console"],
            "level": LAMP_LOG_LEVEL,
            "propagate": False,
        },
    },
}
