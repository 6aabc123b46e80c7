"""Tests for the lamp engine, its commands and its run registry."""
