"""Shared synthetic-data builders for the test suite."""

import json

import numpy as np

from botdna.encoding import PostRecord, UserTimeline
from botdna.minhash import ShingleSet

TOKEN_WIDTH = 16


def make_tokens(rng: np.random.Generator, n: int) -> list[str]:
    """n distinct fixed-width hex tokens, deterministic for a given rng state."""
    out: set[str] = set()
    while len(out) < n:
        for v in rng.integers(0, 1 << 60, size=n):
            out.add(format(int(v), f"0{TOKEN_WIDTH}x"))
            if len(out) >= n:
                break
    return sorted(out)


def make_set_pair(exact_jaccard: float, union_size: int, rng: np.random.Generator):
    """Two ShingleSets whose exact Jaccard is round(j*u)/u by construction.

    Built as shared-core-plus-disjoint-tails: |A ∩ B| = m tokens common to
    both, the remaining union elements split between the two sides.
    """
    m = round(exact_jaccard * union_size)
    tokens = make_tokens(rng, union_size)
    core = tokens[:m]
    rest = tokens[m:]
    half = len(rest) // 2
    a = frozenset(core + rest[:half])
    b = frozenset(core + rest[half:])
    return (
        ShingleSet("set-a", TOKEN_WIDTH, a),
        ShingleSet("set-b", TOKEN_WIDTH, b),
    )


def exact_jaccard(a: ShingleSet, b: ShingleSet) -> float:
    union = a.shingles | b.shingles
    return len(a.shingles & b.shingles) / len(union) if union else 1.0


# --- synthetic behavioral corpora ------------------------------------------

BOT_KIND_CYCLES = [("retweet",), ("retweet", "retweet", "plain")]
HUMAN_KIND_CYCLES = [("plain", "reply"), ("plain", "plain", "reply", "retweet")]

KINDS = ("plain", "retweet", "reply")


def archetype_timeline(
    user_id: str,
    label: str,
    cycle: tuple,
    n_posts: int,
    rng: np.random.Generator,
    noise: float = 0.0,
    gap_seconds: int = 3600,
) -> UserTimeline:
    """Timeline following a repeating kind pattern, optionally noise-flipped."""
    posts = []
    ts = 1_000_000
    flips = rng.random(n_posts) < noise if noise > 0 else np.zeros(n_posts, dtype=bool)
    noisy_kinds = rng.integers(0, len(KINDS), size=n_posts)
    for i in range(n_posts):
        kind = KINDS[noisy_kinds[i]] if flips[i] else cycle[i % len(cycle)]
        posts.append(PostRecord(ts, kind))
        ts += gap_seconds
    return UserTimeline(user_id, label, posts)


def synthetic_corpus(
    n_users: int,
    n_posts: int,
    seed: int,
    noise: float = 0.0,
    bot_cycles=None,
    human_cycles=None,
) -> list[UserTimeline]:
    """Balanced corpus of bot/human archetype timelines."""
    bot_cycles = bot_cycles or BOT_KIND_CYCLES[:1]
    human_cycles = human_cycles or HUMAN_KIND_CYCLES[:1]
    rng = np.random.Generator(np.random.Philox(key=seed))
    users = []
    for i in range(n_users):
        if i % 2 == 0:
            cycle = bot_cycles[(i // 2) % len(bot_cycles)]
            users.append(archetype_timeline(f"bot{i:05d}", "bot", cycle, n_posts, rng, noise))
        else:
            cycle = human_cycles[(i // 2) % len(human_cycles)]
            users.append(archetype_timeline(f"hum{i:05d}", "human", cycle, n_posts, rng, noise))
    return users


def corpus_to_jsonl(users, path):
    """Serialize timelines into the neutral JSONL interchange format."""
    with open(path, "w", encoding="utf-8") as fh:
        for user in users:
            doc = {
                "user_id": user.user_id,
                "label": user.label,
                "tweets": [
                    {
                        "ts": p.timestamp,
                        "kind": p.kind,
                        "urls": p.url_count,
                        "hashtags": p.hashtag_count,
                        "mentions": p.mention_count,
                    }
                    for p in user.posts
                ],
            }
            fh.write(json.dumps(doc) + "\n")
    return path

