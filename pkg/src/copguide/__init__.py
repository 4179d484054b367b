"""Anticipatory vibrotactile guidance of the centre of pressure during walking."""
