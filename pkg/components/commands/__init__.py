from components.commands.command import Command, Argument

__all__ = [
    "Command",
    "Argument"
]
