"""Stemmer oracle tests.

The expected outputs below are the published reference pairs for the
original suffix-stripping algorithm, worked through its step rules by hand
before the implementation was written. They exercise every step (1a, 1b
with its cleanup rules, 1c, 2, 3, 4, 5a, 5b).
"""

import pytest

from wow.porter import stem

REFERENCE_PAIRS = [
    # step 1a
    ("caresses", "caress"),
    ("ponies", "poni"),
    ("ties", "ti"),
    ("caress", "caress"),
    ("cats", "cat"),
    ("this", "thi"),
    # step 1b and its cleanup
    ("feed", "feed"),
    ("agreed", "agre"),
    ("plastered", "plaster"),
    ("bled", "bled"),
    ("motoring", "motor"),
    ("sing", "sing"),
    ("conflated", "conflat"),
    ("troubled", "troubl"),
    ("sized", "size"),
    ("hopping", "hop"),
    ("tanned", "tan"),
    ("falling", "fall"),
    ("hissing", "hiss"),
    ("fizzed", "fizz"),
    ("failing", "fail"),
    ("filing", "file"),
    ("seeing", "see"),
    # step 1c
    ("happy", "happi"),
    ("sky", "sky"),
    ("dying", "dy"),
    # step 2
    ("relational", "relat"),
    ("conditional", "condit"),
    ("rational", "ration"),
    ("valenci", "valenc"),
    ("hesitanci", "hesit"),
    ("digitizer", "digit"),
    ("conformabli", "conform"),
    ("radicalli", "radic"),
    ("differentli", "differ"),
    ("vileli", "vile"),
    ("analogousli", "analog"),
    ("vietnamization", "vietnam"),
    ("predication", "predic"),
    ("operator", "oper"),
    ("feudalism", "feudal"),
    ("decisiveness", "decis"),
    ("hopefulness", "hope"),
    ("callousness", "callous"),
    ("formaliti", "formal"),
    ("sensitiviti", "sensit"),
    ("sensibiliti", "sensibl"),
    # step 3
    ("triplicate", "triplic"),
    ("formative", "form"),
    ("formalize", "formal"),
    ("electriciti", "electr"),
    ("electrical", "electr"),
    ("hopeful", "hope"),
    ("goodness", "good"),
    # step 4
    ("revival", "reviv"),
    ("allowance", "allow"),
    ("inference", "infer"),
    ("airliner", "airlin"),
    ("gyroscopic", "gyroscop"),
    ("adjustable", "adjust"),
    ("defensible", "defens"),
    ("irritant", "irrit"),
    ("replacement", "replac"),
    ("adjustment", "adjust"),
    ("dependent", "depend"),
    ("adoption", "adopt"),
    ("homologou", "homolog"),
    ("communism", "commun"),
    ("activate", "activ"),
    ("angulariti", "angular"),
    ("homologous", "homolog"),
    ("effective", "effect"),
    ("bowdlerize", "bowdler"),
    ("cement", "cement"),
    # step 5a
    ("probate", "probat"),
    ("rate", "rate"),
    ("cease", "ceas"),
    # step 5b
    ("controll", "control"),
    ("roll", "roll"),
    # grouping behavior relied on by the word hierarchy
    ("running", "run"),
    ("runs", "run"),
]


@pytest.mark.parametrize("word,expected", REFERENCE_PAIRS)
def test_reference_pairs(word, expected):
    assert stem(word) == expected


@pytest.mark.parametrize("word", ["a", "i", "is", "be", "an"])
def test_short_words_unchanged(word):
    assert stem(word) == word


def test_idempotent_on_reference_outputs():
    for _, out in REFERENCE_PAIRS:
        assert stem(stem(out)) == stem(out)
