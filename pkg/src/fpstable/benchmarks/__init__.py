"""Example programs shipped with the package."""

from importlib import resources

from ..lang import Program, parse_program


def names() -> list[str]:
    return sorted(p.name[:-4] for p in resources.files(__name__).iterdir()
                  if p.name.endswith(".rnl"))


def source(name: str) -> str:
    return resources.files(__name__).joinpath(f"{name}.rnl").read_text()


def load(name: str) -> Program:
    return parse_program(source(name))


__all__ = ["load", "names", "source"]
