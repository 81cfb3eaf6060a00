# Copyright (c) 2024 The wh-cert-lib authors
# SPDX-License-Identifier: AGPL-3.0

"""Exception hierarchy. Library code raises these; only the CLI turns them into exit codes."""


class WhCertError(Exception):
    """Base class of all errors raised by wh_cert_lib."""


class ConstraintError(WhCertError, ValueError):
    """Invalid weakly-hard constraint parameters."""


class LossWordError(WhCertError, ValueError):
    """Loss word that cannot be decomposed (leading loss or constraint violation)."""


class HorizonError(WhCertError, ValueError):
    """Enumeration horizon outside the supported range."""


class DimensionError(WhCertError, ValueError):
    """Dimensions of systems, controllers, sets or certificates do not agree."""


class ProblemConfigError(WhCertError, ValueError):
    """Malformed problem or schedule configuration."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path  # JSON path of the offending entry, e.g. $.sets.X0.semi_axes[1]
        self.message = message


class EncodingError(WhCertError, ValueError):
    """The requested certificate encoding cannot be built for this problem."""


class DegreeError(EncodingError):
    """Polynomial degrees exceed the configured cap or cannot be matched by the Gram basis."""


class MonitorError(WhCertError, ValueError):
    """Trajectory cannot be aligned to a path of the graph."""


class CertificateMismatchError(WhCertError, ValueError):
    """Certificate does not fit the variant, graph or system it is checked against."""
