from .utils.logging import logger
