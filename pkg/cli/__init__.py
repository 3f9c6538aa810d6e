"""Command-line runner for orthogonally additive map decompositions."""
