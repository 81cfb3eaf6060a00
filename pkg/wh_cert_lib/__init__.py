# Copyright (c) 2024 The wh-cert-lib authors
# SPDX-License-Identifier: AGPL-3.0

from .classes import (
    CertReport,
    CertStatus,
    GbfCertificate,
    GbfVariant,
    LinearController,
    LinearSystem,
    LossWord,
    PolyGbf,
    PolynomialController,
    PolynomialSystem,
    Schedule,
    Strategy,
    WhConstraint,
    WhGraph,
    WhProblem,
)
from .utils.graph_utils import build_graph
from .utils.lmi_utils import synthesize, verify
from .utils.simulation_utils import falsify, monitor, rollout
from .utils.sos_utils import verify_sos
from .utils.validation_utils import validate_cert
