import sys
import inspect
import logging


class Log:
    def __init__(self, debug=False):
        self.logger = logging.getLogger("cmr")
        if not self.logger.handlers:
            self.logger.setLevel(logging.DEBUG if debug else logging.INFO)
            formatter = logging.Formatter("%(asctime)s - %(name)s - %(levelname)s - %(message)s")
            # stdout carries JSON reports
            stream_handler = logging.StreamHandler(sys.stderr)
            stream_handler.setLevel(logging.DEBUG)
            stream_handler.setFormatter(formatter)
            self.logger.addHandler(stream_handler)
        elif debug:
            self.logger.setLevel(logging.DEBUG)

    def set_debug(self, debug):
        log_level = logging.DEBUG if debug else logging.INFO
        self.logger.setLevel(log_level)

    def _prefix(self, frame):
        return f"{frame.f_code.co_filename.split('/')[-1]} - {frame.f_code.co_name}"

    def debug(self, message):
        self.logger.debug(f"{self._prefix(inspect.currentframe().f_back)} - {message}")

    def info(self, message):
        self.logger.info(f"{self._prefix(inspect.currentframe().f_back)} - {message}")

    def warning(self, message):
        self.logger.warning(f"{self._prefix(inspect.currentframe().f_back)} - {message}")

    def error(self, message):
        self.logger.error(f"{self._prefix(inspect.currentframe().f_back)} - {message}")
