"""CT radiomics pipeline: filters, features, selection, models, evaluation, explanations."""

__version__ = "0.1.0"
