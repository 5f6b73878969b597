#!/usr/bin/env python3
"""Writes the synthetic fixture under data/fixture/.

15 systems over 50 learner sentences: 12 minimal-edit systems of graded
quality, two fluency-oriented rewriters (REF-F, GPT-3.5) and the uncorrected
INPUT. Human judgments prefer outputs close to a fluent rewrite (sentence
based) or to the minimal gold correction (edit based), with 10% noise.

Usage: make_fixture.py [out_dir]
"""

import json
import os
import random
import sys

SEED = 20240101
N_SENTENCES = 50

# Slot syntax: [gold/err/fluent]; "_" = no variant, "~" = empty, "+" joins tokens.
TEMPLATES = [
    "[In+my+opinion+,/_/I+think] [my+brother] [likes/like/_] to [go/goes/_] to [the/~/_] park [every+day/_/daily] .",
    "[The/~/_] teacher [gave/give/_] us [a+lot+of/_/many] [homeworks/_/_] [yesterday/_/_] .",
    "I [have/has/_] [been/be/_] living [in/on/_] this city [for/since/_] three years .",
    "[There/Their/_] [are/is/_] [many/much/_] people who [want/wants/_] to [learn/learning/_] English .",
    "She [does+not/not/_] [like/likes/_] [the/~/_] weather [because/_/as] it is [very+cold/_/freezing] .",
    "We [went/go/_] to [the/a/_] museum and [saw/see/_] [a+lot+of/_/many] old [paintings/painting/_] .",
    "[My/Mine/_] parents [were/was/_] [very+happy/_/delighted] when I [passed/pass/_] the exam .",
    "[It/_/_] is [important/importent/_] [for/to/_] students to [get/_/obtain] enough sleep .",
    "He [has/have/_] [never/_/_] [seen/saw/_] [such+a/such/_] [beautiful/_/stunning] view before .",
    "[In+the+future+,/_/Someday+,] I [want/wants/_] to [become/became/_] [a/an/_] doctor .",
    "[The/~/_] students [discussed/discussed+about/_] the problem [in/on/_] class .",
    "They [did+not/didn't+not/_] [know/knew/_] [what/_/_] to [do/did/_] [at+that+time/_/then] .",
    "[Many/Much/_] [children/childs/_] [play/plays/_] games [on/in/_] their phones [every+day/everyday/daily] .",
    "I [am/is/_] [interested/interesting/_] [in/on/_] [learning/learn/_] [about/_/_] history .",
    "[Last+year+,/_/_] we [travelled/travel/_] to Japan [and/_/_] [it+was/_/which+was] [really+fun/_/wonderful] .",
    "The [information/informations/_] [was/were/_] [very+useful/_/invaluable] [for/to/_] me .",
]

BASE = [f"SYS{i:02d}" for i in range(1, 13)]
FLUENT = ["GPT-3.5", "REF-F"]
# (probability of fixing each error, probability of a spurious edit per token)
QUALITY = {name: (0.97 - 0.06 * i, 0.005 + 0.008 * i) for i, name in enumerate(BASE)}

CONFUSABLE = {
    "a": "the", "the": "a", "in": "on", "on": "in", "is": "are", "are": "is",
    "was": "were", "were": "was", "has": "have", "have": "has", "to": "for",
}


def parse_template(text):
    slots = []
    for piece in text.split(" "):
        if piece.startswith("["):
            gold, err, fluent = (piece[1:-1].split("/") + ["_", "_"])[:3]
            toks = lambda s: None if s == "_" else ([] if s == "~" else s.split("+"))
            slots.append((toks(gold), toks(err), toks(fluent)))
        else:
            slots.append(([piece], None, None))
    return slots


def levenshtein(a, b):
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, 1):
        cur = [i]
        for j, y in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (x != y)))
        prev = cur
    return prev[-1]


def make_sentence(rng, template):
    """Returns (source, gold edits, gold, fluent, slots with error flags)."""
    slots = parse_template(template)
    source, gold, fluent, edits, chosen = [], [], [], [], []
    for g, e, f in slots:
        has_err = e is not None and rng.random() < 0.75
        src_piece = e if has_err else g
        if has_err:
            edits.append((len(source), len(source) + len(src_piece), g))
        source += src_piece
        gold += g
        fluent += f if f is not None else g
        chosen.append((g, e if has_err else None, f))
    if not edits:  # every sentence needs at least one error
        return make_sentence(rng, template)
    return source, edits, gold, fluent, chosen


def corrupt(rng, tokens, rate):
    out = []
    for t in tokens:
        if rng.random() < rate:
            kind = rng.randrange(3)
            if kind == 0 and t in CONFUSABLE:
                out.append(CONFUSABLE[t])
                continue
            if kind == 1 and t in ("a", "the"):
                continue
            if kind == 2:
                out += [t, "the"]
                continue
        out.append(t)
    return out


def system_output(rng, chosen, fix_p, fluent_p, spurious):
    out = []
    for g, e, f in chosen:
        if f is not None and rng.random() < fluent_p:
            out += f
        elif e is not None and rng.random() >= fix_p:
            out += e
        else:
            out += g
    return corrupt(rng, out, spurious)


def m2_block(source, annotators):
    lines = ["S " + " ".join(source)]
    for ann, edits in enumerate(annotators):
        if not edits:
            lines.append(f"A -1 -1|||noop|||-NONE-|||REQUIRED|||-NONE-|||{ann}")
        for s, e, repl in edits:
            r = " ".join(repl) if repl else "-NONE-"
            lines.append(f"A {s} {e}|||R:OTHER|||{r}|||REQUIRED|||-NONE-|||{ann}")
    return "\n".join(lines) + "\n"


def second_annotator(rng, chosen):
    """Same corrections, but one fluent rewrite where possible."""
    pos, edits, rewrote = 0, [], False
    for g, e, f in chosen:
        src = e if e is not None else g
        target = g
        if f is not None and not rewrote and rng.random() < 0.5:
            target, rewrote = f, True
        if src != target:
            edits.append((pos, pos + len(src), target))
        pos += len(src)
    return edits


def judgments_for(rng, sid, outputs, groups, key, granularity, flip=0.1):
    out = []
    for group in groups:
        for i in range(len(group)):
            for j in range(i + 1, len(group)):
                a, b = group[i], group[j]
                qa, qb = key(outputs[a]), key(outputs[b])
                verdict = ">" if qa > qb else "<" if qa < qb else "="
                if rng.random() < flip:
                    verdict = rng.choice([v for v in (">", "<", "=") if v != verdict])
                out.append({"sentence_id": sid, "granularity": granularity,
                            "annotator": rng.randrange(3), "system_a": a, "system_b": b,
                            "verdict": verdict})
    return out


def main():
    out_dir = sys.argv[1] if len(sys.argv) > 1 else os.path.join(
        os.path.dirname(os.path.abspath(__file__)), "..", "data", "fixture")
    rng = random.Random(SEED)
    systems = BASE + FLUENT + ["INPUT"]

    sentences = []
    for k in range(N_SENTENCES):
        sentences.append(make_sentence(rng, TEMPLATES[k % len(TEMPLATES)]))

    corpus, m2, fluent_ref = [], [], []
    hyps = {s: [] for s in systems}
    for k, (source, edits, gold, fluent, chosen) in enumerate(sentences):
        sid = f"s{k + 1:03d}"
        corpus.append({"id": sid,
                       "previous": " ".join(sentences[k - 1][0]) if k > 0 else "",
                       "source": " ".join(source),
                       "following": " ".join(sentences[k + 1][0]) if k + 1 < N_SENTENCES else ""})
        annotators = [edits]
        if rng.random() < 0.4:
            annotators.append(second_annotator(rng, chosen))
        m2.append(m2_block(source, annotators))
        fluent_ref.append(" ".join(fluent))
        for name in BASE:
            fix_p, spurious = QUALITY[name]
            hyps[name].append(system_output(rng, chosen, fix_p, 0.0, spurious))
        hyps["REF-F"].append(list(fluent))
        hyps["GPT-3.5"].append(system_output(rng, chosen, 0.97, 0.7, 0.01))
        hyps["INPUT"].append(list(source))

    judgments = []
    baseline = []
    for k, (source, edits, gold, fluent, chosen) in enumerate(sentences):
        sid = corpus[k]["id"]
        outputs = {s: hyps[s][k] for s in systems}
        for granularity, key in (("sentence_based", lambda h: -levenshtein(h, fluent)),
                                 ("edit_based", lambda h: -levenshtein(h, gold))):
            pool = list(systems)
            rng.shuffle(pool)
            groups = [pool[0:5], pool[5:10], pool[10:15]][: 2 if k % 2 else 3]
            judgments += judgments_for(rng, sid, outputs, groups, key, granularity)
        for s in systems:
            score = -levenshtein(outputs[s], fluent) + rng.gauss(0, 2.5)
            baseline.append({"system": s, "sentence_id": sid, "score": round(score, 6)})

    os.makedirs(os.path.join(out_dir, "systems"), exist_ok=True)

    def write(name, lines):
        with open(os.path.join(out_dir, name), "w", encoding="utf-8", newline="\n") as f:
            f.writelines(line + "\n" for line in lines)

    write("corpus.jsonl", [json.dumps(c) for c in corpus])
    write("fluent_reference.txt", fluent_ref)
    write("judgments.jsonl", [json.dumps(j) for j in judgments])
    write("baseline_scores.jsonl", [json.dumps(b) for b in baseline])
    for s in systems:
        write(os.path.join("systems", s + ".txt"), [" ".join(h) for h in hyps[s]])
    with open(os.path.join(out_dir, "gold.m2"), "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(m2))

    config = {
        "corpus": "corpus.jsonl",
        "systems_dir": "systems",
        "gold_m2": "gold.m2",
        "judgments": "judgments.jsonl",
        "external_scores": {"Baseline": "baseline_scores.jsonl"},
        "subset": {"base": BASE, "plus_fluent_extra": FLUENT},
        "metrics": {"beta": 0.5, "gleu_max_n": 4, "gleu_iterations": 500, "gleu_seed": 13},
        "judges": [
            {"granularity": "sentence_based", "criterion": "fluency", "model": "gpt-4",
             "group_size": 5, "group_seed": 7,
             "mock": {"mode": "reference_distance", "reference": "fluent_reference.txt",
                      "model": "mock-fluency"}},
            {"granularity": "edit_based", "criterion": "none", "model": "gpt-4",
             "group_size": 5, "group_seed": 7,
             "mock": {"mode": "edit_count", "model": "mock-edits"}},
        ],
        "rating": {"mu0": 0.0, "sigma0": 0.5, "perf_beta": 0.25, "dynamics_tau": 0.0,
                   "draw_margin": "auto", "passes": 2, "seed": 11, "resamples": 200,
                   "confidence": 0.95},
        "metaeval": {"tie_eps": 0, "window": 4},
        "out": "out",
        "threads": 1,
    }
    with open(os.path.join(out_dir, "config.json"), "w", encoding="utf-8", newline="\n") as f:
        json.dump(config, f, indent=2)
        f.write("\n")


if __name__ == "__main__":
    main()
