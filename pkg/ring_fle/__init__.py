from ._version import get_versions

__version__ = get_versions()["version"]
del get_versions

from ._utils import *  # noqa
from ._ring import *  # noqa
from ._protocols import *  # noqa
from ._attacks import *  # noqa
from ._phase_attacks import *  # noqa
from ._oracle import *  # noqa
from ._reductions import *  # noqa
from ._treesim import *  # noqa
from ._harness import *  # noqa
