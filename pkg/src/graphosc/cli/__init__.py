"""Configuration-driven experiment harness and command-line entry point."""
