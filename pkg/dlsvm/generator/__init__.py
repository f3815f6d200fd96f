"""
This folder contains writers for run outputs.
Each module defines write(...) -> bool, and read(...) where the output is
loaded back (the model artifact, metrics tables).
"""
