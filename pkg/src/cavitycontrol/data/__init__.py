"""Bundled scenario files."""
from pathlib import Path

DEMO_CONFIG = Path(__file__).with_name("demo.yaml")
