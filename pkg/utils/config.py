import os
from pathlib import Path
from dotenv import load_dotenv

ROOT_DIR = Path(__file__).parent.parent
load_dotenv(ROOT_DIR / '.env')


def _path_setting(name: str, default: Path) -> Path:
    value = os.environ.get(name, "").strip()
    if not value:
        return default
    path = Path(value)
    return path if path.is_absolute() else ROOT_DIR / path


# Bundled data
ASSET_DIR = _path_setting('AUGMENT_ASSET_DIR', ROOT_DIR / 'data' / 'assets')
TEXT_TABLE_DIR = _path_setting('AUGMENT_TEXT_TABLE_DIR', ROOT_DIR / 'data' / 'text')
DEFAULT_AUGSET_PATH = ROOT_DIR / 'data' / 'eval' / 'default_augset.json'

# External tools
TRANSCODER_CMD = os.environ.get('AUGMENT_TRANSCODER', '').strip()
ADAPTER_TIMEOUT = float(os.environ.get('AUGMENT_ADAPTER_TIMEOUT', '600'))

# Execution
WORKERS = max(1, int(os.environ.get('AUGMENT_WORKERS', '4')))
FRAME_WINDOW = max(1, int(os.environ.get('AUGMENT_FRAME_WINDOW', '8')))
LOG_LEVEL = os.environ.get('AUGMENT_LOG_LEVEL', 'INFO').upper()
LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

# HTTP surface
CORS_ORIGINS = os.environ.get('CORS_ORIGINS', '*').split(',')
PORT = int(os.environ.get('PORT', '8080'))
