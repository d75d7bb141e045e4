# Version of the phantomsync package (read by setup.py)
__version__ = "0.3.0"
