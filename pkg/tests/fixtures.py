"""Synthetic corpora with planted structure."""

import numpy as np


def planted_corpus(n_sentences=5000, n_topics=60, topic_size=20, n_general=800,
                   n_function=100, seed=1):
    """Topic-clustered sentences: topic words co-occur within their topic,
    general words follow a Zipf law, function words are everywhere."""
    rng = np.random.default_rng(seed)
    topics = [[f"t{k:02d}_{j:02d}" for j in range(topic_size)] for k in range(n_topics)]
    tw = 1.0 / np.arange(1, topic_size + 1) ** 0.7
    tw /= tw.sum()
    general = [f"g{i:04d}" for i in range(n_general)]
    gw = 1.0 / np.arange(1, n_general + 1) ** 1.05
    gw /= gw.sum()
    function = [f"f{i:03d}" for i in range(n_function)]
    lines = []
    for _ in range(n_sentences):
        k = rng.integers(n_topics)
        words = list(rng.choice(topics[k], size=rng.integers(3, 7), p=tw))
        words += list(rng.choice(general, size=rng.integers(2, 6), p=gw))
        words += list(rng.choice(function, size=rng.integers(2, 5)))
        rng.shuffle(words)
        lines.append(" ".join(words))
    return lines


def hub_corpus(n_assoc=1200, per_sentence=4, n_background=30000, seed=5):
    """``hub`` co-occurs with ``n_assoc`` associates at graded strengths;
    ``the`` is the most frequent word and appears in every hub sentence."""
    rng = np.random.default_rng(seed)
    assoc = [f"a{i:04d}" for i in range(n_assoc)]
    slots = [a for i, a in enumerate(assoc) for _ in range(2 + i % 6)]
    slots = [slots[i] for i in rng.permutation(len(slots))]
    lines = []
    for i in range(0, len(slots), per_sentence):
        lines.append(" ".join(["hub", "the"] + slots[i:i + per_sentence]))
    for i, a in enumerate(assoc):
        lines += [f"{a} bg{i % 97:02d}"] * ((i * 7) % 5)
    stop = [f"s{i:03d}" for i in range(120)]
    for j in range(n_background):
        words = ["the"] if j % 5 == 0 else []
        words += list(rng.choice(stop, size=3, replace=False))
        lines.append(" ".join(words))
    order = rng.permutation(len(lines))
    return [lines[i] for i in order]


def make_pool(n_per_cell=200, seed=0, shift=None, comma_fraction=0.5):
    """Annotated candidates whose controls are i.i.d. across cells.

    ``shift=(variable, cell, amount_in_sd)`` displaces one control in one
    cell to make balance impossible.
    """
    from coocsem.stimgen import CONDITIONS, StimulusItem

    rng = np.random.default_rng(seed)
    controls = {  # mean, sd, integer-valued
        "as_verb_noun": (1.23, 0.30, False), "as_adj_noun": (1.21, 0.30, False),
        "ca_verb_adj": (28.0, 15.0, True),
        "noun_length": (6.1, 1.4, True), "noun_freq_class": (11.3, 2.0, True), "noun_on": (1.6, 2.2, True),
        "verb_length": (7.0, 0.95, True), "verb_freq_class": (12.6, 3.0, True), "verb_on": (2.2, 2.6, True),
        "adjective_length": (6.4, 1.3, True), "adjective_freq_class": (13.3, 2.8, True),
        "adjective_on": (0.7, 1.1, True),
        "closed1_length": (3.3, 1.3, True), "closed1_freq_class": (3.2, 2.4, True),
        "closed2_length": (3.4, 1.1, True), "closed2_freq_class": (2.5, 1.5, True),
        "closed3_length": (3.4, 1.0, True), "closed3_freq_class": (2.6, 1.6, True),
    }
    items = []
    for cond in CONDITIONS:
        for i in range(n_per_cell):
            f = {"as_verb_adj": 0.0}
            for v, (mu, sd, integer) in controls.items():
                x = rng.normal(mu, sd)
                if shift and shift[0] == v and shift[1] == cond:
                    x += shift[2] * sd
                x = max(x, 0.0)
                f[v] = int(round(x)) if integer else float(x)
            f["ca_verb_noun"] = int(rng.integers(61, 120)) if cond[0] == "H" else int(rng.integers(0, 15))
            f["ca_adj_noun"] = int(rng.integers(61, 120)) if cond[1] == "H" else int(rng.integers(0, 15))
            items.append(StimulusItem(f"{cond}-{i:03d}", "", {}, f,
                                      bool(rng.random() < comma_fraction), cond))
    return items
