from __future__ import annotations
from enum import Enum

class BaseEnum(Enum):

    def __eq__(self, __value: object) -> bool:
        """
        Python, being an interpreted language,
        has issues when classes are imported from two different locations
        (running a module as __main__ and importing it elsewhere).

        As such we define equality on the class name and value instead.
        """
        if self.__class__.__name__ == __value.__class__.__name__:
            return self.value == __value.value
        return False

    def __hash__(self) -> int:
        # Overriding __eq__ drops the inherited hash; enums are used as dict keys.
        return hash((self.__class__.__name__, self.value))

    @classmethod
    def from_name(cls, name: str) -> BaseEnum:
        """
        Look a member up by name, case-insensitively.
        Used when reading enums back out of traces and config files.

        :raises KeyError: when no member has that name.
        """
        for member in cls:
            if member.name.lower() == name.strip().lower():
                return member
        raise KeyError(f"{cls.__name__} has no member named '{name}'")
