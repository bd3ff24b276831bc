"""Distance-based energy losses for geometric regression, with spin-system and rigidity tooling."""

__version__ = "0.1.0"
