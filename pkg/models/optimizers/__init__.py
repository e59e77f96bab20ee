from models.optimizers.adam import Adam

__all__ = [
    "Adam"
]
