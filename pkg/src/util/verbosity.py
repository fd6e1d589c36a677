"""Process settings read from the environment (and `.env`). None of them changes computed output."""

import os
import sys
from dotenv import load_dotenv

load_dotenv()

# LOG_VERBOSITY levels
QUIET, SUMMARY, DETAIL, SEARCH = 0, 1, 2, 3

TRUTHY = ('1', 'true', 'yes', 'y', 'on')


def _get_log_verbosity() -> int:
    raw = os.getenv('LOG_VERBOSITY', str(SUMMARY))
    try:
        return max(QUIET, int(raw))
    except ValueError:
        print(f"Invalid LOG_VERBOSITY {raw!r} in .env, defaulting to {SUMMARY}", file=sys.stderr)
        return SUMMARY


def _get_flag(name: str, default: str = 'false') -> bool:
    return os.getenv(name, default).strip().lower() in TRUTHY


LOG_VERBOSITY = _get_log_verbosity()
TRACK_RUNS = _get_flag('TRACK_RUNS')
