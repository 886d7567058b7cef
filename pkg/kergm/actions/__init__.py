"""User-facing actions returning result dictionaries."""
