#!/usr/bin/env python3
"""Builds the ingestion test fixture.

Writes wordlist/association/concept-form/frequency/borrowability CSVs plus a
blocklist under tests/fixtures/ingest/, then recounts everything from the
written files with independent logic and stores the result in expected.json.
The construction targets exactly 400 co-attested concept pairs and places
pairs on both sides of every filter boundary.
"""

import csv
import json
import math
import os
from itertools import combinations

OUT = os.path.join(os.path.dirname(__file__), "..", "tests", "fixtures", "ingest")

COMMONS = [
    "sun", "moon", "water", "fire", "stone", "tree", "fish", "bird", "dog",
    "hand", "eye", "ear", "mouth", "blood", "bone", "night", "day", "star",
    "rain", "wind", "man", "husband", "we (inclusive)", "they", "path",
]
RARES = ["frost", "dune", "reef", "taiga"]

NAMES = [
    "abar", "bedo", "cili", "dumo", "enna", "folo", "gile", "hana", "ibex",
    "joku", "kelo", "lima", "mano", "nilo", "opal", "pira", "quro", "rana",
    "sipa", "tolo", "umba", "vire", "walo", "xenu", "yaro", "zulu", "amba",
    "bilo", "cora", "dena", "erio", "fama", "gora", "hilo", "ista", "jula",
]
CODES = [f"{NAMES[i]}{1200 + i}" for i in range(36)]

# index ranges are 1-based language numbers
NIGHT_MISSING = set(range(31, 37))
PATH_MISSING = set(range(30, 37))
RARE_CARRIERS = {"frost": range(1, 9), "dune": range(9, 17),
                 "reef": range(17, 25), "taiga": range(25, 33)}

# (concept_a, concept_b) -> colexifying language numbers
COLEX = {
    ("man", "husband"): range(1, 13),        # kept
    ("sun", "day"): range(1, 6),             # kept, colex exactly 5
    ("moon", "night"): range(1, 5),          # dropped, colex 4
    ("water", "rain"): range(1, 26),         # kept
    ("night", "star"): range(1, 7),          # kept, attested exactly 30
    ("path", "star"): range(1, 7),           # dropped, attested 29
    ("we (inclusive)", "they"): range(1, 9), # dropped, blocklist
    ("they", "man"): range(2, 9),            # dropped, blocklist
    ("bone", "blood"): range(1, 10),         # dropped, no borrowability
    ("ear", "mouth"): range(1, 7),           # kept, zero-frequency pair
    ("hand", "eye"): range(1, 8),            # kept, 2x2 association case
    ("dog", "bird"): range(1, 6),            # kept, two-language association
    ("fish", "water"): range(3, 10),         # kept, directed-score average
    ("star", "rain"): range(5, 10),          # kept, single borrowability
}

RESOURCE_LANGS = ["eng", "spa", "deu"]
CORPUS = {"eng": 100000000, "spa": 50000000, "deu": 25000000}
# concepts covered by a strict subset of the resource languages
COVERAGE = {"fish": ["eng"], "hand": ["eng"], "eye": ["eng"],
            "dog": ["eng", "spa"], "bird": ["eng", "spa"]}
MULTI_FORMS = {("hand", "eng"): ["hand1_eng", "hand2_eng"],
               ("eye", "eng"): ["eye1_eng", "eye2_eng"]}
NO_FREQUENCY = {"ear", "mouth"}
NO_BORROW = {"bone", "blood", "rain"}

ASSOC_ROWS = [
    ("eng", "hand1_eng", "eye1_eng", 0.1),
    ("eng", "hand1_eng", "eye2_eng", 0.2),
    ("eng", "hand2_eng", "eye1_eng", 0.3),
    ("eng", "hand2_eng", "eye2_eng", 0.4),
    ("eng", "dog_eng", "bird_eng", 0.1),
    ("spa", "dog_spa", "bird_spa", 0.3),
    ("eng", "fish_eng", "water_eng", 0.2),
    ("eng", "water_eng", "fish_eng", 0.4),
    ("eng", "water_eng", "rain_eng", 0.15),
]


def pair_id(a, b):
    return "|".join(sorted((a, b)))


def language_concepts(num):
    """Concepts attested by language number (1-based), before varieties."""
    concepts = set(COMMONS)
    if num in NIGHT_MISSING:
        concepts.discard("night")
    if num in PATH_MISSING:
        concepts.discard("path")
    for rare, carriers in RARE_CARRIERS.items():
        if num in carriers:
            concepts.add(rare)
    return concepts


def build_wordlist():
    rows = []  # (glottocode, variety, concept, form)

    def add(num, variety, concept, form):
        rows.append((CODES[num - 1], variety, concept, form))

    colex_by_lang = {}
    for (a, b), langs in COLEX.items():
        for num in langs:
            colex_by_lang.setdefault(num, []).append((a, b))

    for num in range(1, 37):
        concepts = language_concepts(num)
        if num == 1:
            # north: everything except tree; south: a three-concept remnant
            for concept in sorted(concepts - {"tree"}):
                add(num, "north", concept, f"f_{concept}_l{num}")
            for a, b in colex_by_lang.get(num, []):
                form = f"cx_{a[:2]}{b[:2]}_l{num}"
                add(num, "north", a, form)
                add(num, "north", b, form)
            add(num, "south", "sun", "sf_l01")
            add(num, "south", "fish", "sf_l01")
            add(num, "south", "fish", "treefish_l01")
            add(num, "south", "tree", "treefish_l01")
            continue
        if num == 2:
            # the alphabetically-first variety is the least complete one
            add(num, "aaa", "sun", "sm_l02")
            add(num, "aaa", "moon", "sm_l02")
            add(num, "aaa", "water", "f_water_l02aaa")
            variety = "zzz"
        else:
            variety = "std"
        for concept in sorted(concepts):
            add(num, variety, concept, f"f_{concept}_l{num}")
        for a, b in colex_by_lang.get(num, []):
            form = f"cx_{a[:2]}{b[:2]}_l{num}"
            add(num, variety, a, form)
            add(num, variety, b, form)
    return rows


def build_concept_forms():
    rows = []
    for concept in sorted(COMMONS):
        for rl in RESOURCE_LANGS:
            if concept in COVERAGE and rl not in COVERAGE[concept]:
                continue
            for form in MULTI_FORMS.get((concept, rl), [f"{concept}_{rl}"]):
                rows.append((rl, concept, form))
    return rows


def build_frequencies(concept_forms):
    rows = []
    index = {c: i for i, c in enumerate(sorted(COMMONS))}
    seen = set()
    for rl, concept, form in concept_forms:
        if concept in NO_FREQUENCY or (rl, form) in seen:
            continue
        seen.add((rl, form))
        rows.append((rl, form, (index[concept] + 1) * 10, CORPUS[rl]))
    return rows


def build_borrowability():
    rows = []
    ordered = sorted(set(COMMONS) - NO_BORROW)
    for i, concept in enumerate(ordered):
        rows.append((concept, round(0.05 + 0.9 * i / (len(ordered) - 1), 3)))
    return rows


def write_csv(name, header, rows):
    with open(os.path.join(OUT, name), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow(row)


# ---------------------------------------------------------------------------
# independent recount from the written files


def recount(out_dir):
    with open(os.path.join(out_dir, "wordlist.csv"), newline="") as fh:
        wordlist = list(csv.DictReader(fh))

    forms = {}  # glottocode -> variety -> concept -> set of forms
    for r in wordlist:
        forms.setdefault(r["glottocode"], {}).setdefault(r["variety"], {}) \
            .setdefault(r["concept_id"], set()).add(r["form"])

    universe = set()
    for varieties in forms.values():
        for concepts in varieties.values():
            for a, b in combinations(sorted(concepts), 2):
                universe.add(pair_id(a, b))
    universe = sorted(universe)

    def variety_cell(concepts, pid):
        a, b = pid.split("|")
        if a not in concepts or b not in concepts:
            return None
        return 1 if concepts[a] & concepts[b] else 0

    matrix = {}  # glottocode -> pid -> value (None = missing)
    for code, varieties in forms.items():
        ranked = sorted(
            varieties.items(),
            key=lambda kv: (-sum(variety_cell(kv[1], p) is not None for p in universe),
                            kv[0]))
        merged = {}
        for pid in universe:
            value = None
            for _, concepts in ranked:
                cell = variety_cell(concepts, pid)
                if value is None and cell is not None:
                    value = cell
            merged[pid] = value
        matrix[code] = merged

    with open(os.path.join(out_dir, "blocklist.txt")) as fh:
        blocked = {line.strip() for line in fh
                   if line.strip() and not line.startswith("#")}

    counts = {}
    for pid in universe:
        colex = sum(1 for code in matrix if matrix[code][pid] == 1)
        attested = sum(1 for code in matrix if matrix[code][pid] is not None)
        counts[pid] = (colex, attested)

    filtered = [pid for pid in universe
                if counts[pid][0] >= 5 and counts[pid][1] >= 30
                and not (set(pid.split("|")) & blocked)]

    with open(os.path.join(out_dir, "concept_forms.csv"), newline="") as fh:
        cmap = {}
        for r in csv.DictReader(fh):
            cmap.setdefault(r["resource_lang"], {}) \
                .setdefault(r["concept_id"], []).append(r["form"])
    with open(os.path.join(out_dir, "association.csv"), newline="") as fh:
        assoc = {}
        for r in csv.DictReader(fh):
            assoc.setdefault(r["resource_lang"], {})[(r["form_a"], r["form_b"])] = \
                float(r["score"])
    with open(os.path.join(out_dir, "frequency.csv"), newline="") as fh:
        fcount, fsize = {}, {}
        for r in csv.DictReader(fh):
            lang = r["resource_lang"]
            fcount.setdefault(lang, {})[r["form"]] = \
                fcount.get(lang, {}).get(r["form"], 0.0) + float(r["count"])
            fsize[lang] = float(r["corpus_size"])
    with open(os.path.join(out_dir, "borrowability.csv"), newline="") as fh:
        borrow = {r["concept_id"]: float(r["score"]) for r in csv.DictReader(fh)}

    def combo(lang, u, v):
        table = assoc.get(lang, {})
        fwd, rev = table.get((u, v)), table.get((v, u))
        if fwd is not None and rev is not None:
            return 0.5 * (fwd + rev)
        if fwd is not None:
            return fwd
        if rev is not None:
            return rev
        return 0.0

    def assoc_score(pid):
        a, b = pid.split("|")
        per = []
        for lang in cmap:
            fa, fb = cmap[lang].get(a, []), cmap[lang].get(b, [])
            if not fa or not fb:
                continue
            per.append(sum(combo(lang, u, v) for u in fa for v in fb) /
                       (len(fa) * len(fb)))
        return sum(per) / len(per) if per else None

    def zipf(pid):
        a, b = pid.split("|")
        per = []
        for lang in cmap:
            fa, fb = cmap[lang].get(a, []), cmap[lang].get(b, [])
            if not fa or not fb or lang not in fsize:
                continue
            total = sum(fcount.get(lang, {}).get(f, 0.0) for f in set(fa) | set(fb))
            if total == 0:
                total = 1.0
            per.append(math.log10(total / fsize[lang] * 1e6) + 3.0)
        return sum(per) / len(per) if per else None

    def borrow_score(pid):
        a, b = pid.split("|")
        sa, sb = borrow.get(a), borrow.get(b)
        if sa is not None and sb is not None:
            return 0.5 * (sa + sb)
        return sa if sa is not None else sb

    survivors = []
    for pid in filtered:
        s = (assoc_score(pid), zipf(pid), borrow_score(pid))
        if any(v is None for v in s):
            continue
        survivors.append({"pair": pid, "colex": counts[pid][0],
                          "attested": counts[pid][1], "associativity": s[0],
                          "zipf": s[1], "borrowability": s[2]})

    return {
        "n_languages": len(matrix),
        "n_pairs_initial": len(universe),
        "n_pairs_filtered": len(filtered),
        "n_pairs_scored": len(survivors),
        "survivors": survivors,
        "dropped_by_colex": [p for p in ["moon|night"] if counts[p][0] < 5],
        "dropped_by_attested": [p for p in ["path|star"] if counts[p][1] < 30],
        "dropped_by_blocklist": sorted(
            p for p in universe if set(p.split("|")) & blocked
            and counts[p][0] >= 5 and counts[p][1] >= 30),
        "dropped_by_scores": [p for p in filtered
                              if p not in {s["pair"] for s in survivors}],
        "matrix_cells": [
            {"glottocode": CODES[0], "pair": "fish|tree", "value": matrix[CODES[0]]["fish|tree"]},
            {"glottocode": CODES[0], "pair": "sun|tree", "value": matrix[CODES[0]]["sun|tree"]},
            {"glottocode": CODES[0], "pair": "fish|sun", "value": matrix[CODES[0]]["fish|sun"]},
            {"glottocode": CODES[1], "pair": "moon|sun", "value": matrix[CODES[1]]["moon|sun"]},
        ],
    }


def main():
    os.makedirs(OUT, exist_ok=True)
    write_csv("wordlist.csv", ["glottocode", "variety", "concept_id", "form"],
              build_wordlist())
    concept_forms = build_concept_forms()
    write_csv("concept_forms.csv", ["resource_lang", "concept_id", "form"],
              concept_forms)
    write_csv("association.csv", ["resource_lang", "form_a", "form_b", "score"],
              ASSOC_ROWS)
    write_csv("frequency.csv", ["resource_lang", "form", "count", "corpus_size"],
              build_frequencies(concept_forms))
    write_csv("borrowability.csv", ["concept_id", "score"], build_borrowability())
    with open(os.path.join(OUT, "blocklist.txt"), "w") as fh:
        fh.write("# grammatical concepts excluded from pairing\n")
        fh.write("we (inclusive)\nthey\n")

    expected = recount(OUT)
    assert expected["n_pairs_initial"] == 400, expected["n_pairs_initial"]
    assert expected["matrix_cells"][0]["value"] == 1   # gap filled with 1
    assert expected["matrix_cells"][1]["value"] == 0   # gap filled with 0
    assert expected["matrix_cells"][2]["value"] == 0   # base 0 kept over 1
    assert expected["matrix_cells"][3]["value"] == 0   # completeness beats name
    with open(os.path.join(OUT, "expected.json"), "w") as fh:
        json.dump(expected, fh, indent=2)
        fh.write("\n")
    print(f"wrote fixture: {expected['n_pairs_initial']} pairs, "
          f"{expected['n_pairs_filtered']} filtered, "
          f"{expected['n_pairs_scored']} scored")


if __name__ == "__main__":
    main()
