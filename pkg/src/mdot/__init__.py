"""Mutable DOT: a DOT calculus with typed mutable references."""
