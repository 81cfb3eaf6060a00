# Copyright (c) 2024 The wh-cert-lib authors
# SPDX-License-Identifier: AGPL-3.0

from .certificate import CertReport, CertStatus, GbfCertificate, GbfVariant, PolyGbf, VariantKind, load_certificate
from .polynomial import Polynomial
from .problem import ProblemSets, Schedule, WhProblem
from .sets import QuadraticForm, SemiAlgebraicSet
from .system import LinearController, LinearSystem, PolynomialController, PolynomialSystem, Strategy
from .trajectory import FalsificationReport, MonitorLedger, Trajectory
from .wh_constraint import LabelWord, LossWord, WhConstraint
from .wh_graph import WhGraph
