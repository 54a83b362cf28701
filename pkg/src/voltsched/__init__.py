"""Speed scaling with predicted workloads."""
