"""Behavioral DNA encoding of user timelines.

A user's post history becomes a string of symbols, one symbol per post per
alphabet.  Three built-in alphabets are supported:

* ``B3`` (post type): A = plain post, C = repost/retweet, T = reply.
* ``B5`` (post content): which entity categories (URLs, hashtags, mentions)
  a post carries -- X for two or more categories, U/H/M for exactly one,
  N for none.
* ``B9`` (posting tempo): the time elapsed since the user's previous post,
  bucketed into nine ranges from "within an hour" up to "over a month".

With several alphabets the per-post symbols are interleaved in the declared
alphabet order, so the sequence length is ``len(posts) * len(alphabets)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import chain
from typing import NamedTuple

from .errors import EmptyTimeline

HUMAN = "human"
BOT = "bot"

POST_KINDS = ("plain", "retweet", "reply")

SECONDS_PER_HOUR = 3600
SECONDS_PER_DAY = 86400
SECONDS_PER_WEEK = 7 * SECONDS_PER_DAY
# Calendar-free month so encoding never depends on the wall-clock date.
SECONDS_PER_MONTH = 30 * SECONDS_PER_DAY


class PostRecord(NamedTuple):
    """One post: when it happened, what kind it was, which entities it carried."""

    timestamp: int
    kind: str
    url_count: int = 0
    hashtag_count: int = 0
    mention_count: int = 0


@dataclass
class UserTimeline:
    """A user's chronologically ordered posts plus an optional truth label.

    ``label`` is ``"human"``, ``"bot"``, or ``None`` for unknown.
    """

    user_id: str
    label: str | None
    posts: list[PostRecord]


@dataclass(frozen=True)
class Alphabet:
    id: str
    symbols: tuple[str, ...]


B3_TYPE = Alphabet("B3", ("A", "C", "T"))
B5_CONTENT = Alphabet("B5", ("X", "U", "H", "M", "N"))
B9_TEMPORAL = Alphabet("B9", ("B", "D", "E", "F", "G", "J", "K", "I", "L"))

ALPHABETS: dict[str, Alphabet] = {a.id: a for a in (B3_TYPE, B5_CONTENT, B9_TEMPORAL)}

# Canonical order used by the CLI and the grid search.
CANONICAL_ALPHABET_ORDER = ("B3", "B5", "B9")

_B3_BY_KIND = {"plain": "A", "retweet": "C", "reply": "T"}

_B9_BUCKETS = (
    (1 * SECONDS_PER_HOUR, "B"),
    (5 * SECONDS_PER_HOUR, "D"),
    (10 * SECONDS_PER_HOUR, "E"),
    (15 * SECONDS_PER_HOUR, "F"),
    (20 * SECONDS_PER_HOUR, "G"),
    (1 * SECONDS_PER_DAY, "J"),
    (1 * SECONDS_PER_WEEK, "K"),
    (1 * SECONDS_PER_MONTH, "I"),
)


@dataclass(frozen=True)
class DnaSequence:
    """Encoded symbol string for one user, tagged with the alphabets used."""

    user_id: str
    alphabets: tuple[str, ...]
    symbols: str


def encode_b3(post: PostRecord) -> str:
    """Symbol for the post's kind: plain -> A, retweet -> C, reply -> T."""
    return _B3_BY_KIND[post.kind]


def encode_b5(post: PostRecord) -> str:
    """Symbol for the post's entity mix.

    Two or more distinct entity categories present -> X; exactly one ->
    U (URLs), H (hashtags) or M (mentions); none -> N.  Only presence
    matters: a post with three URLs and nothing else is still 'U'.
    """
    categories = (post.url_count > 0) + (post.hashtag_count > 0) + (post.mention_count > 0)
    if categories >= 2:
        return "X"
    if post.url_count > 0:
        return "U"
    if post.hashtag_count > 0:
        return "H"
    if post.mention_count > 0:
        return "M"
    return "N"


def encode_b9(delta_seconds: int | float) -> str:
    """Symbol for the gap since the previous post.

    Buckets have inclusive upper bounds: <=1h B, <=5h D, <=10h E, <=15h F,
    <=20h G, <=1 day J, <=1 week K, <=30 days I, longer L.
    """
    if delta_seconds < 0:
        raise ValueError(f"negative time delta: {delta_seconds!r}")
    for bound, symbol in _B9_BUCKETS:
        if delta_seconds <= bound:
            return symbol
    return "L"


def resolve_alphabets(ids: "list[str] | tuple[str, ...]") -> tuple[Alphabet, ...]:
    """Map alphabet ids to Alphabet objects, rejecting unknowns and duplicates."""
    if not ids:
        raise ValueError("at least one alphabet is required")
    if len(set(ids)) != len(ids):
        raise ValueError(f"duplicate alphabet ids: {ids!r}")
    try:
        return tuple(ALPHABETS[i] for i in ids)
    except KeyError as exc:
        raise ValueError(f"unknown alphabet id {exc.args[0]!r}") from None


def encode_user(timeline: UserTimeline, alphabets: "list[str] | tuple[str, ...]") -> DnaSequence:
    """Encode a timeline under one or more alphabets.

    Posts are sorted by timestamp first, so input order does not matter.
    For each post the symbols of the declared alphabets are emitted in
    order, producing an interleaved string of length
    ``len(posts) * len(alphabets)``.  The first post's temporal gap is
    defined as zero (symbol 'B').
    """
    resolved = resolve_alphabets(alphabets)
    if not timeline.posts:
        raise EmptyTimeline(f"user {timeline.user_id!r} has no posts")
    posts = sorted(timeline.posts, key=lambda p: p.timestamp)

    columns: list[list[str]] = []
    for alphabet in resolved:
        if alphabet.id == "B3":
            columns.append([_B3_BY_KIND[p.kind] for p in posts])
        elif alphabet.id == "B5":
            columns.append([encode_b5(p) for p in posts])
        else:
            deltas = ["B"]  # no previous post: gap defined as zero
            prev = posts[0].timestamp
            for p in posts[1:]:
                deltas.append(encode_b9(p.timestamp - prev))
                prev = p.timestamp
            columns.append(deltas)

    if len(columns) == 1:
        symbols = "".join(columns[0])
    else:
        symbols = "".join(chain.from_iterable(zip(*columns)))
    return DnaSequence(timeline.user_id, tuple(a.id for a in resolved), symbols)
