"""Entropy estimators built from finite-truncation cover costs."""

from .critical import *  # noqa: F401,F403
from .katok import *  # noqa: F401,F403
from .local import *  # noqa: F401,F403
from .spanning import *  # noqa: F401,F403
from .verify import *  # noqa: F401,F403
