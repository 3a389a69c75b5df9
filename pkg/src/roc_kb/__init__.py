"""Knowledge-base toolkit for COVID-19 government response statistics."""

__version__ = "0.1.0"
