"""Translation-based sequential recommendation."""
