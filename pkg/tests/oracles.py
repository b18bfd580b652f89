"""Independent reference implementations used only by the test suite."""

import itertools


def brute_force_min_edits(ref, hyp):
    """Minimum S+I+D over every monotone alignment, by direct enumeration.

    An alignment pairs ref positions with hyp positions, strictly increasing
    on both sides (combinations zipped in order); paired-unequal tokens are
    substitutions, unpaired ref tokens deletions, unpaired hyp tokens
    insertions. Independent of the DP being checked.
    """
    best = len(ref) + len(hyp)
    m, n = len(ref), len(hyp)
    for k in range(min(m, n) + 1):
        for ref_idx in itertools.combinations(range(m), k):
            for hyp_idx in itertools.combinations(range(n), k):
                subs = sum(ref[i] != hyp[j] for i, j in zip(ref_idx, hyp_idx))
                best = min(best, subs + (m - k) + (n - k))
    return best
