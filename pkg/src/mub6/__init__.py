"""Discretized search for four mutually unbiased bases in dimension 6."""

from .core import DiscBasis, DiscMat, DiscParams, DiscVec, FeasKind, canonicalize, is_canonical
from .certify import DescentVerdict, descend, oracle_feasible
from .sets import SetBundle, SetKind, VectorSet
from .hadsearch import PruneConfig, enumerate_prehad, prune_to_had, verify_had_membership
from .stage2 import ContradictionCertificate, Verdict, build_b, build_c, process_a, recheck_certificate

__version__ = "0.1.0"
