"""
Simple wrapper to allow access to config from the different modules.
"""

import configparser

config = configparser.ConfigParser()
# Keep option case so logger names like RUN can be configured in [logging]
config.optionxform = str
