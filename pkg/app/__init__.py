from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

# Import core components
from .core.config import settings
from .core.logging_config import get_logger

# Initialize main application logger; module loggers propagate to it
logger = get_logger(__name__)

__version__ = settings.APP_VERSION
