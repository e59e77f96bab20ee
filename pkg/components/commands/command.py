import argparse
import inspect
import types
import typing
from pathlib import Path
from typing import Any, Callable, Generic, ParamSpec, TypeVar, cast

import griffe
from pydantic import BaseModel, ConfigDict, computed_field

CommandInput = ParamSpec("CommandInput")
CommandOutput = TypeVar("CommandOutput")

# Parameters filled by the caller rather than from the command line
CONTEXT_PARAMETERS = {"self", "cls", "run"}
_SCALAR_TYPES = (int, float, str, Path)


def _unwrap_optional(annotation: Any) -> tuple[Any, bool]:
    origin = typing.get_origin(annotation)
    if origin in (typing.Union, types.UnionType):
        members = [member for member in typing.get_args(annotation) if member is not type(None)]
        if len(members) == 1:
            return members[0], True
    return annotation, False


class Argument(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    name: str
    description: str
    annotation: Any
    required: bool = True
    default: Any = None

    @computed_field
    @property
    def flag(self) -> str:
        return "--" + self.name.replace("_", "-")

    def add_to(self, parser: argparse.ArgumentParser) -> None:
        annotation, _ = _unwrap_optional(self.annotation)
        options: dict[str, Any] = dict(dest=self.name, help=self.description or None)
        if annotation is bool:
            options["action"] = argparse.BooleanOptionalAction
            options["default"] = bool(self.default)
        elif typing.get_origin(annotation) is list:
            item_type = (typing.get_args(annotation) or (str,))[0]
            options.update(action="append", type=item_type, default=None if self.required else self.default)
        else:
            options["type"] = annotation if annotation in _SCALAR_TYPES else str
            if self.required:
                options["required"] = True
            else:
                options["default"] = self.default
        parser.add_argument(self.flag, **options)


class Command(BaseModel, Generic[CommandInput, CommandOutput]):
    """
    A command-line subcommand built from an annotated function and its sphinx docstring.
    Use as a decorator: the function name without its ``cmd_`` prefix names the subcommand.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True)

    name: str
    description: str
    arguments: list[Argument]
    function: Callable[CommandInput, CommandOutput]

    def __init__(self, *args, **kwargs):
        if len(args) == 1 and not kwargs:
            argument = args[0]
            if isinstance(argument, Command):
                kwargs = dict(argument)
            elif inspect.isfunction(argument):
                kwargs = dict(self.from_function(argument))
            else:
                raise TypeError(f"A command is built from a function, got {type(argument).__name__}")
        super().__init__(**kwargs)

    @classmethod
    def from_function(cls, function: Callable[CommandInput, CommandOutput]) -> "Command":
        signature = inspect.signature(function)
        description, arguments_descriptions = help_texts(function)
        hints = typing.get_type_hints(function)

        arguments = []
        for parameter in signature.parameters.values():
            if parameter.name in CONTEXT_PARAMETERS:
                continue
            arguments.append(
                Argument(
                    name=parameter.name,
                    description=arguments_descriptions.get(parameter.name, ""),
                    annotation=hints.get(parameter.name, str),
                    required=(parameter.default == inspect.Parameter.empty),
                    default=None if parameter.default == inspect.Parameter.empty else parameter.default,
                )
            )

        return cls(
            name=function.__name__.removeprefix("cmd_"),
            description=description,
            arguments=arguments,
            function=function,
        )

    def add_parser(self, subparsers, parents: list[argparse.ArgumentParser] | None = None) -> argparse.ArgumentParser:
        summary = self.description.splitlines()[0] if self.description else None
        parser = subparsers.add_parser(self.name, help=summary, description=self.description, parents=parents or [])
        for argument in self.arguments:
            argument.add_to(parser)
        parser.set_defaults(command=self.name)
        return parser

    def arguments_from(self, namespace: argparse.Namespace) -> dict[str, Any]:
        return {argument.name: getattr(namespace, argument.name) for argument in self.arguments}

    def __call__(self, *args: CommandInput.args, **kwargs: CommandInput.kwargs) -> CommandOutput:
        return self.function(*args, **kwargs)


def help_texts(function: Callable) -> tuple[str, dict[str, str]]:
    """
    The summary and per-parameter help of a sphinx docstring, as shown by ``--help``
    """
    documentation = inspect.getdoc(function)
    if not documentation:
        return "", {}

    # griffe looks parameter annotations up on the docstring parent
    parent = cast(griffe.Object, inspect.signature(function))
    docstring = griffe.Docstring(documentation, lineno=1, parser=griffe.Parser.sphinx, parent=parent)

    summary, parameters = "", {}
    for section in docstring.parse():
        if section.kind is griffe.DocstringSectionKind.text and not summary:
            summary = section.value
        elif section.kind is griffe.DocstringSectionKind.parameters:
            parameters.update((parameter.name, parameter.description) for parameter in section.value)
    return summary, parameters
