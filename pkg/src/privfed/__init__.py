"""Federated diabetes-prediction simulator: SMOTE, boosted trees, Fernet-encrypted
updates, F1 x size weighted ensembling and output differential privacy."""

__version__ = "0.1.0"
