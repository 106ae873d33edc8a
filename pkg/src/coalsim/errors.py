"""Exception hierarchy shared by all coalsim modules.

InputError covers invalid arguments and refused guard checks (CLI exit
code 2); NumericalError covers runtime numerical failures such as
non-convergence or all-degenerate weights (CLI exit code 3).
"""


class CoalsimError(Exception):
    pass


class InputError(CoalsimError):
    pass


class NumericalError(CoalsimError):
    pass
