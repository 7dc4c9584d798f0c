"""Exception types shared across the package."""


class NumericalError(RuntimeError):
    """A simulation produced an unusable state (exit code 1 in the CLI)."""


class InvertedCellError(NumericalError):
    def __init__(self, cell, slot, jacobian, body=None, step=None):
        self.cell = int(cell)
        self.slot = int(slot)
        self.jacobian = float(jacobian)
        self.body = body
        self.step = step
        where = f"cell {self.cell}, slot {self.slot + 1}"
        if body is not None:
            where = f"body {body!r}, " + where
        if step is not None:
            where += f", step {step}"
        super().__init__(f"inverted cell ({where}): J = {self.jacobian:.6g}")


class NonFiniteStateError(NumericalError):
    def __init__(self, step, body=None):
        self.step = step
        self.body = body
        msg = f"non-finite state at step {step}"
        if body is not None:
            msg += f" in body {body!r}"
        super().__init__(msg)


class ScenarioError(ValueError):
    """Malformed or invalid scenario description (exit code 2 in the CLI)."""

    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        prefix = ""
        if line is not None:
            prefix = f"line {line}: "
        if field is not None:
            prefix += f"{field}: "
        super().__init__(prefix + message)
