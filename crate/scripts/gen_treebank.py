#!/usr/bin/env python3
"""Generate the bundled mini-treebank and neutral vocabulary.

The treebank is produced from a small probabilistic grammar over a hand-written
tagged lexicon covering the 36 Penn-Treebank-style tags used by the tagger.
Punctuation is tagged SYM. Output is deterministic (fixed seed).

    python3 scripts/gen_treebank.py crates/core/data
"""
import random
import sys
from pathlib import Path

LEX = {
    "CC": "and but or yet nor",
    "CD": "one two three four five ten twenty hundred 2 3 7 12 2020",
    "DT": "the a an this that these those every each another no some any",
    "EX": "there",
    "FW": "etc vice versa per se",
    "IN": "in on at with from about of for under after before during without like since than near because if",
    "JJ": "good bad happy sad tired new old long dark empty heavy quiet small big hard cold warm lonely strange late early fine last whole real free afraid angry calm bright broken",
    "JJR": "better worse bigger harder colder darker longer",
    "JJS": "best worst biggest hardest darkest longest",
    "LS": "a b c",
    "MD": "can could will would should might must may",
    "NN": "day night home friend mother father dog car work school life time room phone music book water city job game week morning pain love hope sleep help weather movie coffee door problem world hurt back",
    "NNS": "days nights friends parents dogs cars books games weeks people things thoughts songs problems hours years kids tears",
    "NNP": "john mary alex sam london monday friday texas twitter sarah mike paris",
    "NNPS": "americans canadians mondays beatles",
    "PDT": "all both half such",
    "POS": "'s",
    "PRP": "i you he she it we they me him her us them myself yourself himself",
    "PRP$": "my your his her its our their",
    "RB": "really very not never always just still often again maybe too so quite almost already soon back home here there fine",
    "RBR": "more less better faster",
    "RBS": "most least best",
    "RP": "up out off down over away back",
    "SYM": ". , ! ? ; : - ( ) & % + = # * /",
    "TO": "to",
    "UH": "oh yeah wow hey ugh hmm lol ok please",
    "VB": "go be feel see make want know think get take sleep eat help love hurt need try stop talk call watch run stay leave cry like",
    "VBD": "went was felt saw made wanted knew thought got took slept ate helped loved hurt needed tried stopped talked called watched ran stayed left cried liked",
    "VBG": "going being feeling seeing making wanting thinking getting taking sleeping eating helping loving hurting trying talking watching running staying crying",
    "VBN": "gone been felt seen made known thought taken eaten helped loved hurt tried stopped called left broken lost",
    "VBP": "go am are feel see make want know think get need love hate hurt try like cry",
    "VBZ": "goes is feels sees makes wants knows thinks gets needs loves hates hurts tries likes cries",
    "WDT": "which that whatever",
    "WP": "who what whom",
    "WP$": "whose",
    "WRB": "when where why how",
}

TAGS = sorted(LEX)
assert len(TAGS) == 36, len(TAGS)


def words(tag):
    return LEX[tag].split()


def pick(rng, tag):
    return (rng.choice(words(tag)), tag)


def noun_phrase(rng, plural=False):
    r = rng.random()
    if plural:
        if r < 0.3:
            return [pick(rng, "DT"), pick(rng, "NNS")] if rng.random() < 0.5 else [("the", "DT"), pick(rng, "JJ"), pick(rng, "NNS")]
        if r < 0.5:
            return [pick(rng, "CD"), pick(rng, "NNS")]
        if r < 0.65:
            return [pick(rng, "PDT"), ("the", "DT"), pick(rng, "NNS")]
        if r < 0.8:
            return [pick(rng, "PRP$"), pick(rng, "NNS")]
        return [pick(rng, "NNPS")]
    if r < 0.35:
        np = [pick(rng, "DT")]
        if rng.random() < 0.4:
            np.append(pick(rng, "JJ"))
        np.append(pick(rng, "NN"))
        return np
    if r < 0.55:
        return [pick(rng, "PRP$"), pick(rng, "NN")]
    if r < 0.7:
        return [pick(rng, "NNP")]
    if r < 0.8:
        return [pick(rng, "NNP"), ("'s", "POS"), pick(rng, "NN")]
    if r < 0.9:
        return [("the", "DT"), pick(rng, "JJS"), pick(rng, "NN")]
    return [(rng.choice(["me", "him", "her", "us", "them", "it"]), "PRP")]


def subject(rng):
    r = rng.random()
    if r < 0.45:
        w = rng.choice(["i", "you", "we", "they"])
        return [(w, "PRP")], "plural"
    if r < 0.65:
        return [(rng.choice(["he", "she", "it"]), "PRP")], "third"
    if r < 0.85:
        return noun_phrase(rng), "third"
    return noun_phrase(rng, plural=True), "plural"


def prep_phrase(rng):
    return [pick(rng, "IN")] + noun_phrase(rng)


def verb_phrase(rng, agr):
    r = rng.random()
    obj = noun_phrase(rng)
    if r < 0.2:
        vp = [pick(rng, "VBD")] + obj
    elif r < 0.35:
        vp = [pick(rng, "VBZ" if agr == "third" else "VBP")] + obj
    elif r < 0.47:
        vp = [pick(rng, "MD")]
        if rng.random() < 0.3:
            vp.append(("not", "RB"))
        vp += [pick(rng, "VB")] + obj
    elif r < 0.57:
        be = ("is", "VBZ") if agr == "third" else (rng.choice(["are", "am"]), "VBP")
        vp = [be, pick(rng, "VBG")] + obj
    elif r < 0.65:
        have = ("has", "VBZ") if agr == "third" else ("have", "VBP")
        vp = [have, pick(rng, "VBN")]
        if rng.random() < 0.5:
            vp += obj
    elif r < 0.73:
        be = ("was", "VBD")
        vp = [be, pick(rng, "RB"), pick(rng, "JJ")] if rng.random() < 0.5 else [be, pick(rng, "JJ")]
    elif r < 0.8:
        vp = [pick(rng, "VBD"), pick(rng, "TO"), pick(rng, "VB")] + obj
    elif r < 0.86:
        vp = [pick(rng, "VBD"), pick(rng, "RP")]
    elif r < 0.91:
        vp = [("feel", "VBP") if agr != "third" else ("feels", "VBZ"), pick(rng, "JJR"), pick(rng, "IN")] + obj
    elif r < 0.95:
        vp = [pick(rng, "VBD"), pick(rng, "RBR")]
    else:
        vp = [pick(rng, "VBD"), pick(rng, "RBS"), pick(rng, "JJ")]
    if rng.random() < 0.25:
        vp += prep_phrase(rng)
    if rng.random() < 0.15:
        vp.append(pick(rng, "RB"))
    return vp


def clause(rng):
    subj, agr = subject(rng)
    return subj + verb_phrase(rng, agr)


def sentence(rng):
    r = rng.random()
    if r < 0.5:
        s = clause(rng)
    elif r < 0.62:
        s = clause(rng) + [(",", "SYM"), pick(rng, "CC")] + clause(rng)
    elif r < 0.7:
        s = [("there", "EX"), ("is", "VBZ")] + noun_phrase(rng) + prep_phrase(rng)
    elif r < 0.78:
        s = [pick(rng, "WRB"), ("do", "VBP")] + [("you", "PRP")] + [pick(rng, "VB")] + noun_phrase(rng)
        return s + [("?", "SYM")]
    elif r < 0.84:
        s = [pick(rng, "UH"), (",", "SYM")] + clause(rng)
    elif r < 0.89:
        rel = rng.choice([("who", "WP"), ("that", "WDT"), ("which", "WDT")])
        s = noun_phrase(rng) + [rel] + verb_phrase(rng, "third") + [("is", "VBZ"), pick(rng, "JJ")]
    elif r < 0.92:
        s = [pick(rng, "WP"), ("knows", "VBZ"), pick(rng, "WP$"), pick(rng, "NN"), ("this", "DT"), ("is", "VBZ")]
        return s + [("?", "SYM")]
    elif r < 0.95:
        s = [(rng.choice(LEX["LS"].split()), "LS"), (")", "SYM")] + clause(rng)
    elif r < 0.97:
        s = clause(rng) + [(",", "SYM"), ("etc", "FW")]
    else:
        s = clause(rng) + [pick(rng, "IN")] + clause(rng)
    return s + [(rng.choice([".", ".", "!"]), "SYM")]


def main():
    out = Path(sys.argv[1] if len(sys.argv) > 1 else "crates/core/data")
    rng = random.Random(20210611)
    lines = []
    for _ in range(500):
        s = sentence(rng)
        lines.append(" ".join(f"{w}_{t}" for w, t in s))
    (out / "mini_treebank.txt").write_text("\n".join(lines) + "\n")

    neutral = set()
    for tag in ("NN", "NNS", "VB", "VBD", "VBG", "JJ", "RB", "IN", "DT", "PRP", "CC", "MD", "CD", "UH"):
        for w in words(tag):
            if w.isalpha() and w not in ("hurt", "pain", "tears", "broken", "lost", "cry", "cried", "crying", "lonely", "sad", "angry", "afraid", "empty", "dark", "heavy", "bad", "hate"):
                neutral.add(w)
    extra = ("weather lunch dinner breakfast garden park street train bus office meeting email laptop "
             "pizza tea soccer basketball guitar piano movie show episode series concert beach river "
             "mountain trip vacation holiday birthday party weekend shopping store market recipe "
             "kitchen bike walk run gym workout dog cat bird photo picture camera video podcast news "
             "team season match score ticket class homework project deadline report coworker boss "
             "neighbor cousin brother sister uncle aunt grandma sunny rainy windy tomorrow today "
             "yesterday afternoon evening plan idea question answer update post thread reply").split()
    neutral.update(extra)
    (out / "neutral_vocab.txt").write_text("\n".join(sorted(neutral)) + "\n")


if __name__ == "__main__":
    main()
