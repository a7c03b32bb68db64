"""JSON test results, one entry per test, adjusted by the test decorators."""
import inspect
import json
import sys
import time
from unittest import result
from unittest.signals import registerResult

import test_utils.decorators as decorators

DECORATOR_CLASSES = [
    klass for _name, klass in inspect.getmembers(decorators)
    if inspect.isclass(klass) and issubclass(klass, decorators.Decorator) and klass != decorators.Decorator
]

class JSONTestResult(result.TestResult):
    """Collects one dict per test: name, status, duration and captured output."""

    def __init__(self, stream, descriptions, verbosity, results):
        super().__init__(stream, descriptions, verbosity)
        self.descriptions = descriptions
        self.results = results
        self._started: dict[str, float] = {}

    def getDescription(self, test):
        doc_first_line = test.shortDescription()
        if self.descriptions and doc_first_line:
            return doc_first_line
        return str(test)

    def getOutput(self) -> str:
        if not self.buffer:
            return ""
        out = self._stdout_buffer.getvalue()
        err = self._stderr_buffer.getvalue()
        if err:
            if out and not out.endswith("\n"):
                out += "\n"
            out += err
        return out

    def startTest(self, test):
        self._started[test.id()] = time.perf_counter()
        super().startTest(test)

    def buildResult(self, test, status: str, err=None) -> dict:
        output = self.getOutput()
        entry = {
            "name": self.getDescription(test),
            "status": status,
            "seconds": round(time.perf_counter() - self._started.get(test.id(), time.perf_counter()), 3),
        }
        method = getattr(test, test._testMethodName, None)
        for dec in DECORATOR_CLASSES:
            dec.change_result(getattr(method, dec.get_attr_name(), None), entry, output, err)
        return entry

    def addSuccess(self, test):
        super().addSuccess(test)
        self.results.append(self.buildResult(test, "passed"))

    def addError(self, test, err):
        super().addError(test, err)
        # Keep captured output out of the terminal on failure.
        self._mirrorOutput = False
        self.results.append(self.buildResult(test, "error", err))

    def addFailure(self, test, err):
        super().addFailure(test, err)
        self._mirrorOutput = False
        self.results.append(self.buildResult(test, "failed", err))

    def addSkip(self, test, reason):
        super().addSkip(test, reason)
        entry = self.buildResult(test, "skipped")
        entry["reason"] = reason
        self.results.append(entry)


class JSONTestRunner:
    """Runs a suite and writes {"testcases": [...], "summary": {...}} to the stream."""

    resultclass = JSONTestResult

    def __init__(self, stream=sys.stdout, descriptions=True, verbosity=1, failfast=False, buffer=True):
        self.stream = stream
        self.descriptions = descriptions
        self.verbosity = verbosity
        self.failfast = failfast
        self.buffer = buffer
        self.json_data = {"testcases": []}

    def run(self, test):
        res = self.resultclass(self.stream, self.descriptions, self.verbosity, self.json_data["testcases"])
        registerResult(res)
        res.failfast = self.failfast
        res.buffer = self.buffer
        res.startTestRun()
        try:
            test(res)
        finally:
            res.stopTestRun()
        self.json_data["summary"] = {
            "run": res.testsRun,
            "failures": len(res.failures),
            "errors": len(res.errors),
            "skipped": len(res.skipped),
        }
        json.dump(self.json_data, self.stream, indent=4)
        self.stream.write("\n")
        return res
