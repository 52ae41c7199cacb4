from dotenv import load_dotenv
import os

load_dotenv()


def get_setting(key: str, default: str) -> str:
    value = os.getenv(key)
    if value is None or value.strip() == "":
        return default
    return value


debug = True if get_setting("DEBUG", "False").lower() == "true" else False
LOG_DIR = get_setting("LOG_DIR", "logs")
RUN_CONFIG = get_setting("RUN_CONFIG", "run.cfg")
