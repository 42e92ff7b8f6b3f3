"""Domain layer: models, ports, algorithms and services."""
