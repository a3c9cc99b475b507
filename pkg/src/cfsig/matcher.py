"""Boolean similarity check between two process signatures.

Two signatures match only when their digest sets are identical (same
algorithm, same size, same members). A sorted-merge walk replaces naive
pairwise search; the verdict is unchanged and the comparison count stays
within s1 + s2 instead of the quadratic worst case.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .signature import ProcessSignature


class Outcome(enum.Enum):
    MATCH = "Match"
    MISMATCH = "Mismatch"


class DetailKind(enum.Enum):
    EQUAL = "Equal"
    SIZE_DIFFER = "SizeDiffer"
    MISSING_DIGEST = "MissingDigest"
    ALGORITHM_DIFFER = "AlgorithmDiffer"


@dataclass(frozen=True)
class MatchVerdict:
    outcome: Outcome
    detail: DetailKind
    digest: str | None = None  # set for MISSING_DIGEST
    missing_from: str | None = None  # "local" or "remote"

    def __str__(self) -> str:
        if self.detail is DetailKind.MISSING_DIGEST:
            return (
                f"{self.outcome.value.upper()} MissingDigest "
                f"digest={self.digest} missing_from={self.missing_from}"
            )
        if self.outcome is Outcome.MATCH:
            return "MATCH"
        return f"MISMATCH {self.detail.value}"


def _compare(local: ProcessSignature, remote: ProcessSignature) -> tuple[MatchVerdict, int]:
    if local.algorithm is not remote.algorithm:
        return MatchVerdict(Outcome.MISMATCH, DetailKind.ALGORITHM_DIFFER), 0
    if len(local.digests) != len(remote.digests):
        return MatchVerdict(Outcome.MISMATCH, DetailKind.SIZE_DIFFER), 0
    comparisons = 0
    for a, b in zip(local.digests, remote.digests):
        comparisons += 1
        if a != b:
            # sorted lists of equal length: the smaller digest is absent
            # from the other side
            if a < b:
                verdict = MatchVerdict(
                    Outcome.MISMATCH, DetailKind.MISSING_DIGEST, a, "remote"
                )
            else:
                verdict = MatchVerdict(
                    Outcome.MISMATCH, DetailKind.MISSING_DIGEST, b, "local"
                )
            return verdict, comparisons
    return MatchVerdict(Outcome.MATCH, DetailKind.EQUAL), comparisons


def match_signatures(local: ProcessSignature, remote: ProcessSignature) -> MatchVerdict:
    return _compare(local, remote)[0]


def match_cost(local: ProcessSignature, remote: ProcessSignature) -> int:
    """Number of digest comparisons performed by match_signatures."""
    return _compare(local, remote)[1]
