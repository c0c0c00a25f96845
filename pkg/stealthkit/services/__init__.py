"""Service helpers behind the command-line surface."""
