"""Closed English word tables for the rule-based backends.

The deterministic tagger, the rule GEC double, and the synthetic corpus
generator share this vocabulary so that planted defects, corrections, and
annotations stay mutually consistent. Coverage is intentionally small;
unknown words fall through to suffix heuristics in the tagger.
"""

from __future__ import annotations

# base -> (third person singular, past, gerund, past participle)
VERB_FORMS: dict[str, tuple[str, str, str, str]] = {
    "go": ("goes", "went", "going", "gone"),
    "run": ("runs", "ran", "running", "run"),
    "sit": ("sits", "sat", "sitting", "sat"),
    "walk": ("walks", "walked", "walking", "walked"),
    "play": ("plays", "played", "playing", "played"),
    "eat": ("eats", "ate", "eating", "eaten"),
    "read": ("reads", "read", "reading", "read"),
    "look": ("looks", "looked", "looking", "looked"),
    "stand": ("stands", "stood", "standing", "stood"),
    "jump": ("jumps", "jumped", "jumping", "jumped"),
    "hold": ("holds", "held", "holding", "held"),
    "wear": ("wears", "wore", "wearing", "worn"),
    "smile": ("smiles", "smiled", "smiling", "smiled"),
    "rain": ("rains", "rained", "raining", "rained"),
    "buy": ("buys", "bought", "buying", "bought"),
    "sell": ("sells", "sold", "selling", "sold"),
    "cook": ("cooks", "cooked", "cooking", "cooked"),
    "drink": ("drinks", "drank", "drinking", "drunk"),
    "ride": ("rides", "rode", "riding", "ridden"),
    "swim": ("swims", "swam", "swimming", "swum"),
    "sleep": ("sleeps", "slept", "sleeping", "slept"),
    "talk": ("talks", "talked", "talking", "talked"),
    "watch": ("watches", "watched", "watching", "watched"),
    "carry": ("carries", "carried", "carrying", "carried"),
    "wait": ("waits", "waited", "waiting", "waited"),
    "see": ("sees", "saw", "seeing", "seen"),
    "have": ("has", "had", "having", "had"),
    "catch": ("catches", "caught", "catching", "caught"),
    "fall": ("falls", "fell", "falling", "fallen"),
    "laugh": ("laughs", "laughed", "laughing", "laughed"),
    "fly": ("flies", "flew", "flying", "flown"),
    "chase": ("chases", "chased", "chasing", "chased"),
    "happen": ("happens", "happened", "happening", "happened"),
    "leave": ("leaves", "left", "leaving", "left"),
    "arrive": ("arrives", "arrived", "arriving", "arrived"),
    "open": ("opens", "opened", "opening", "opened"),
    "close": ("closes", "closed", "closing", "closed"),
    "help": ("helps", "helped", "helping", "helped"),
    "think": ("thinks", "thought", "thinking", "thought"),
    "want": ("wants", "wanted", "wanting", "wanted"),
    "like": ("likes", "liked", "liking", "liked"),
    "enjoy": ("enjoys", "enjoyed", "enjoying", "enjoyed"),
    "start": ("starts", "started", "starting", "started"),
    "finish": ("finishes", "finished", "finishing", "finished"),
    "bark": ("barks", "barked", "barking", "barked"),
    "sing": ("sings", "sang", "singing", "sung"),
    "wave": ("waves", "waved", "waving", "waved"),
    "rest": ("rests", "rested", "resting", "rested"),
    "point": ("points", "pointed", "pointing", "pointed"),
}

# singular -> plural
NOUN_PLURALS: dict[str, str] = {
    "dog": "dogs", "cat": "cats", "boy": "boys", "girl": "girls",
    "man": "men", "woman": "women", "child": "children", "tree": "trees",
    "ball": "balls", "park": "parks", "bench": "benches", "book": "books",
    "library": "libraries", "shelf": "shelves", "train": "trains",
    "station": "stations", "bag": "bags", "market": "markets",
    "stall": "stalls", "apple": "apples", "fruit": "fruits",
    "vendor": "vendors", "kitchen": "kitchens", "pot": "pots",
    "stove": "stoves", "meal": "meals", "beach": "beaches", "wave": "waves",
    "umbrella": "umbrellas", "garden": "gardens", "flower": "flowers",
    "rose": "roses", "picture": "pictures", "table": "tables",
    "chair": "chairs", "street": "streets", "car": "cars", "bird": "birds",
    "house": "houses", "door": "doors", "window": "windows", "coat": "coats",
    "hat": "hats", "basket": "baskets", "fish": "fish", "cloud": "clouds",
    "day": "days", "friend": "friends", "family": "families",
    "path": "paths", "kite": "kites", "shop": "shops", "ticket": "tickets",
    "platform": "platforms", "seat": "seats", "teacher": "teachers",
    "student": "students", "school": "schools", "lady": "ladies",
    "towel": "towels", "shell": "shells", "engine": "engines",
    "bread": "breads", "sand": "sands", "water": "waters", "sun": "suns",
    "sky": "skies", "grass": "grasses", "rain": "rains",
    "picnic": "picnics", "blanket": "blankets", "boat": "boats",
}

SINGULAR_NOUNS = frozenset(NOUN_PLURALS)
PLURAL_TO_SINGULAR = {p: s for s, p in NOUN_PLURALS.items()}
# "fish" is its own plural; treat the shared form as singular
PLURAL_NOUNS = frozenset(p for p in PLURAL_TO_SINGULAR if p not in SINGULAR_NOUNS)

FORM_TO_BASE: dict[str, tuple[str, str]] = {}  # form -> (base, slot)
for _base, (_s3, _past, _ger, _part) in VERB_FORMS.items():
    FORM_TO_BASE.setdefault(_s3, (_base, "3sg"))
    FORM_TO_BASE.setdefault(_past, (_base, "past"))
    FORM_TO_BASE.setdefault(_ger, (_base, "ger"))
    FORM_TO_BASE.setdefault(_part, (_base, "part"))
BASE_VERBS = frozenset(VERB_FORMS)

PRONOUNS = {
    # token -> (Number, Person)
    "i": ("Sing", "1"), "you": ("Sing", "2"), "he": ("Sing", "3"),
    "she": ("Sing", "3"), "it": ("Sing", "3"), "we": ("Plur", "1"),
    "they": ("Plur", "3"), "me": ("Sing", "1"), "him": ("Sing", "3"),
    "her": ("Sing", "3"), "us": ("Plur", "1"), "them": ("Plur", "3"),
    "someone": ("Sing", "3"), "everyone": ("Sing", "3"),
}
THIRD_SING_PRONOUNS = frozenset({"he", "she", "it", "someone", "everyone"})

DETERMINERS = {
    "the": {"PronType": "Art", "Definite": "Def"},
    "a": {"PronType": "Art", "Definite": "Ind"},
    "an": {"PronType": "Art", "Definite": "Ind"},
    "this": {"PronType": "Dem", "Number": "Sing"},
    "that": {"PronType": "Dem", "Number": "Sing"},
    "these": {"PronType": "Dem", "Number": "Plur"},
    "those": {"PronType": "Dem", "Number": "Plur"},
    "my": {"Poss": "Yes"}, "your": {"Poss": "Yes"}, "his": {"Poss": "Yes"},
    "its": {"Poss": "Yes"}, "our": {"Poss": "Yes"}, "their": {"Poss": "Yes"},
    "some": {}, "every": {}, "each": {}, "no": {},
}

PREPOSITIONS = frozenset(
    "in on at near under over beside behind by with from into of to "
    "across along around through during after before between".split()
)

AUXILIARIES = frozenset(
    "is are was were am be been being do does did will would can could "
    "may might must shall should".split()
)

ADVERBS = frozenset(
    "quickly slowly happily loudly quietly then now very really soon maybe "
    "yesterday today tomorrow always often never sometimes there here "
    "together again later first next".split()
)

ADJECTIVES = frozenset(
    "big small red blue green yellow happy sad old young tall short nice "
    "sunny busy quiet warm cold fresh bright dark little long new good "
    "delicious beautiful crowded empty full many several".split()
)

NUMBER_WORDS = frozenset(
    "one two three four five six seven eight nine ten".split()
)
PLURAL_QUANTIFIERS = frozenset(
    "two three four five six seven eight nine ten many several some".split()
)

CCONJ = frozenset({"and", "or", "but"})
SCONJ = frozenset({"because", "while", "when", "although", "if", "as"})
INTERJECTIONS = frozenset({"oh", "wow", "hello", "yes", "um", "uh"})

PAST_TIME_MARKERS = frozenset({"yesterday"})
