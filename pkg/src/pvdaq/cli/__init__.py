"""Command-line front ends: run, simulate, admin, verify."""
