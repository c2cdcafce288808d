"""Test package for the crosslabel-vad toolkit."""
