"""Task-specific experimental design for treatment-effect estimation."""
