# Test tagging decorators; each one stores a value on the test function and
# may adjust that test's entry in the JSON results.
import abc
import os
import unittest

# run_tests.py --slow sets this before the tests are imported.
SLOW_ENV = "INTERSECTION_SLOW"

class InvalidValueException(Exception):
    pass

class Decorator(abc.ABC):

    def __init__(self, v) -> None:
        res = self.validate(v)
        if res:
            raise InvalidValueException(res)
        self.v = v

    def validate(self, v):
        return None

    def __call__(self, func):
        setattr(func, self.get_attr_name(), self.v)
        return func

    @classmethod
    def get_attr_name(cls):
        return f"__{cls.__name__}__"

    @classmethod
    @abc.abstractmethod
    def change_result(cls, saved_value, results: dict, output: str, err):
        """
        Apply your change to the result entry of one test.
        Called for every test, with saved_value None when the decorator wasn't applied.
        """
        pass


class number(Decorator):
    """
    Group and index of a test, e.g. @number("5.3") is the third network test.
    run_tests.py filters on the group.
    """

    def validate(self, v):
        if not isinstance(v, str) or not v.replace(".", "").isdigit():
            return "Number should look like '5.3'."

    @classmethod
    def change_result(cls, saved_value, results: dict, output: str, err):
        if saved_value is not None:
            results["name"] = "{}: {}".format(str(saved_value), results["name"])


class slow(Decorator):
    """
    Marks a long-running test (full training budgets).
    Skipped by run_tests.py unless --slow is given.
    """

    def __init__(self) -> None:
        self.v = True

    def __call__(self, func):
        func = super().__call__(func)
        return unittest.skipUnless(os.environ.get(SLOW_ENV) == "1", "slow test, run with --slow")(func)

    @classmethod
    def change_result(cls, saved_value, results: dict, output: str, err):
        if saved_value is not None:
            results["name"] = "[SLOW] {}".format(results["name"])
        results["passed"] = err is None
        if err is not None:
            results["feedback"] = output + "Test Failed: {}\n".format(err[1])
