"""Synthetic entity-resolution worlds.

Latent entities own a small set of name tokens. Each entity is observed
through several mentions; a mention carries its entity's tokens, except that
each token is swapped for a random vocabulary token with probability
``noise``. Two mentions of the same entity form a positive example (in both
argument orders).
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import List, Tuple


@dataclass(frozen=True)
class SynthConfig:
    n_entities: int = 50
    mentions_per_entity: int = 3
    tokens_per_entity: int = 4
    vocab_size: int = 120
    noise: float = 0.1
    target: str = "sameauthor"
    relation: str = "hasword"
    tag: str = ""

    def __post_init__(self):
        if self.n_entities < 1 or self.mentions_per_entity < 1:
            raise ValueError("need at least one entity and one mention per entity")
        if self.tokens_per_entity < 1:
            raise ValueError("tokens_per_entity must be >= 1")
        if self.vocab_size < self.tokens_per_entity:
            raise ValueError("vocab_size must be at least tokens_per_entity")
        if not 0.0 <= self.noise <= 1.0:
            raise ValueError("noise must lie in [0, 1]")
        for name in (self.target, self.relation):
            if not name[:1].islower() or not name.replace("_", "").isalnum():
                raise ValueError(f"bad predicate name {name!r}")
        if self.tag and not self.tag.replace("_", "").isalnum():
            raise ValueError(f"bad tag {self.tag!r}")


@dataclass
class SynthWorld:
    mentions: List[List[str]]
    tokens: dict
    facts: List[Tuple[str, str]]
    positives: List[Tuple[str, str]]


def build_world(cfg: SynthConfig, seed: int) -> SynthWorld:
    rng = random.Random(seed)
    vocab = [f"w{i:03d}" for i in range(cfg.vocab_size)]
    n_mentions = cfg.n_entities * cfg.mentions_per_entity
    order = list(range(n_mentions))
    rng.shuffle(order)
    width = len(str(n_mentions - 1))
    names = [f"m{cfg.tag}{i:0{width}d}" for i in order]
    mentions, tokens, facts, positives = [], {}, [], []
    for ent in range(cfg.n_entities):
        own = rng.sample(vocab, cfg.tokens_per_entity)
        group = names[ent * cfg.mentions_per_entity:(ent + 1) * cfg.mentions_per_entity]
        mentions.append(group)
        for m in group:
            toks = []
            for tok in own:
                if rng.random() < cfg.noise:
                    tok = rng.choice(vocab)
                if tok not in toks:
                    toks.append(tok)
            tokens[m] = toks
        for i, a in enumerate(group):
            for b in group[i + 1:]:
                positives.append((a, b))
    for m in sorted(tokens):
        facts.extend((m, tok) for tok in tokens[m])
    return SynthWorld(mentions, tokens, facts, sorted(positives))


def generate_synthetic(cfg: SynthConfig = SynthConfig(), seed: int = 0) -> Tuple[str, str]:
    """Return ``(facts text, positives text)`` in the ground-atom file format."""
    world = build_world(cfg, seed)
    facts = "".join(f"{cfg.relation}({m},{t}).\n" for m, t in world.facts)
    pos = "".join(f"{cfg.target}({a},{b}).\n{cfg.target}({b},{a}).\n" for a, b in world.positives)
    return facts, pos
