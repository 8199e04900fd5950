"""Write the offline demo inputs under crates/service/demo/.

Output is deterministic (fixed seed). After editing, regenerate the stub
fixtures with `reviewlens fixtures` (see the README).
"""

import csv
import json
import random
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "crates" / "service" / "demo"

THEMES = {
    "shuffle": (
        [
            "Shuffle keeps playing the same {n} songs from my playlist over and over.",
            "The shuffle button is broken, it repeats the same artist all the time.",
            "Shuffle is not random at all, I hear the same tracks in the same order.",
            "Why does shuffle play the same {n} songs every time I open my playlist?",
            "Shuffle on a {m} song playlist only ever plays the first few songs.",
        ],
        ["Please fix shuffle.", "Really annoying.", "It used to work fine.", "Otherwise ok."],
    ),
    "ads": (
        [
            "Way too many ads, I get {n} ads between every couple of songs.",
            "The ads are so loud and there are too many ads in the free version.",
            "Premium is too expensive and the free tier has too many ads now.",
            "An ad after every song is ridiculous, the ads ruin the app.",
            "The price of premium went up again and the ads keep getting longer.",
        ],
        ["I might cancel.", "Not worth it.", "Greedy.", "So frustrating."],
    ),
    "offline": (
        [
            "My downloaded songs disappear when I go offline on the plane.",
            "Offline mode does not work, downloads vanish after a day.",
            "Downloads keep getting deleted and offline playback fails every time.",
            "I downloaded {n} songs for offline listening and none of them play offline.",
            "Offline downloads stop working after the update, the songs need to download again.",
        ],
        ["Useless for travel.", "Please fix downloads.", "Very disappointing.", "Happens weekly."],
    ),
    "crash": (
        [
            "The app crashes on login after the latest update.",
            "Keeps crashing when I try to log in, I cannot log in at all.",
            "Crashes every time I open the app since the update, login screen freezes.",
            "Login fails and then the app crashes, I reinstalled it {n} times.",
            "After the update the app crashes on startup and login never finishes.",
        ],
        ["Unusable.", "Please fix this crash.", "One star until fixed.", "Terrible update."],
    ),
    "discover": (
        [
            "I love the discover weekly playlist, the recommendations are great.",
            "Great recommendations, discover weekly finds new music I really enjoy.",
            "The recommendations are amazing and discover weekly is my favourite feature.",
            "Love how discover weekly recommends new artists every week.",
            "Best music recommendations of any app, discover weekly is excellent.",
        ],
        ["Five stars.", "Keep it up!", "Love it.", "Wonderful app."],
    ),
}

# Star ratings a reviewer in each theme tends to give.
RATINGS = {
    "shuffle": [1, 2, 2, 3, 5],
    "ads": [1, 1, 2, 2, 4],
    "offline": [1, 1, 2, 3, 5],
    "crash": [1, 1, 1, 2, 5],
    "discover": [5, 5, 4, 4, 1],
}

NON_ENGLISH = [
    "Приложение постоянно вылетает после обновления.",
    "アプリがすぐに落ちます。とても残念です。",
    "广告太多了，体验很差。",
]


def reviews():
    rng = random.Random(7)
    rows = []
    for theme, (openers, closers) in THEMES.items():
        for i in range(30):
            opener = rng.choice(openers).format(n=rng.randint(3, 12), m=rng.choice([200, 500, 900]))
            text = opener if rng.random() < 0.3 else f"{opener} {rng.choice(closers)}"
            rows.append([f"{theme}-{i:02d}", "music-app", text, rng.choice(RATINGS[theme])])
    rng.shuffle(rows)
    rows += [[f"dup-{i}", "music-app", rows[i][2], rows[i][3]] for i in range(3)]
    rows += [[f"intl-{i}", "music-app", t, 1] for i, t in enumerate(NON_ENGLISH)]
    return rows


# (sentence_id, sentence, [(term, category, sentiment)])
GOLD = [
    ("g01", "Shuffle keeps playing the same songs from my playlist.", [("shuffle", "playback", "negative")]),
    ("g02", "Too many ads and premium is too expensive.", [("ads", "monetisation", "negative"), ("premium", "pricing", "negative")]),
    ("g03", "My downloaded songs disappear when I go offline.", [("downloaded songs", "offline", "negative")]),
    ("g04", "The app crashes on login after the update.", [("login", "stability", "negative"), ("update", "stability", "negative")]),
    ("g05", "I love the discover weekly playlist.", [("discover weekly playlist", "recommendations", "positive")]),
    ("g06", "The recommendations are great.", [("recommendations", "recommendations", "positive")]),
    ("g07", "The sound quality is fine but the lyrics view is slow.", [("sound quality", "audio", "neutral"), ("lyrics view", "interface", "negative")]),
    ("g08", "Podcasts load quickly and the search works well.", [("podcasts", "content", "positive"), ("search", "interface", "positive")]),
    ("g09", "The new home screen layout is confusing.", [("home screen layout", "interface", "negative")]),
    ("g10", "Offline mode does not work on my phone.", [("offline mode", "offline", "negative")]),
    ("g11", "The car mode is okay.", [("car mode", "interface", "neutral")]),
    ("g12", "I listen every day on my commute.", []),
    ("g13", "Family plan pricing is reasonable.", [("family plan pricing", "pricing", "positive")]),
    ("g14", "The equalizer settings reset after every restart.", [("equalizer settings", "audio", "negative")]),
    ("g15", "Customer support never answered my ticket.", [("customer support", "support", "negative")]),
    ("g16", "Lyrics are a nice touch.", [("lyrics", "content", "positive")]),
]

# What the stubbed model answers: mostly the gold, with realistic slips.
ANSWER_KEY = [
    ("g01", [("shuffle", "negative")], ["make shuffle random"]),
    ("g02", [("ads", "negative"), ("premium", "negative")], ["show fewer ads", "lower the premium price"]),
    ("g03", [("downloaded songs", "negative")], ["keep downloads offline"]),
    ("g04", [("login", "negative")], ["fix the login crash"]),
    ("g05", [("discover weekly", "positive")], []),
    ("g06", [("recommendations", "positive")], []),
    ("g07", [("sound quality", "positive"), ("lyrics view", "negative")], ["speed up the lyrics view"]),
    ("g08", [("podcasts", "positive"), ("search", "positive")], []),
    ("g09", [("home screen layout", "negative")], ["simplify the home screen"]),
    ("g10", [("offline mode", "negative")], ["fix offline mode"]),
    ("g11", [("car mode", "neutral")], []),
    ("g12", [("commute", "neutral")], []),
    ("g13", [("family plan", "positive")], []),
    ("g14", [("equalizer settings", "negative")], ["persist equalizer settings"]),
    ("g15", [("customer support", "negative")], ["answer support tickets"]),
    ("g16", [("lyrics", "positive")], []),
]

QUERIES = [
    "# One query per line.",
    "Why do downloaded songs disappear offline?",
    "What do users say about shuffle?",
    "Are there too many ads?",
    "Does the app crash on login?",
    "What do people like about discover weekly?",
    "How do I bake sourdough bread?",
]

CONFIG = """\
[corpus]
path = "reviews.csv"
review_id = "review_id"
app_id = "app_id"

[backend]
kind = "stub"
fixtures = "fixtures.jsonl"

[embedding]
kind = "hashed"
dim = 256

[aspects]
input = "gold"
gold = "gold.csv"

[topics]
min_cluster_size = 10

[qa]
k = 5
# Hashed n-gram vectors share a baseline cosine of about 0.2 between
# unrelated English texts, so the evidence floor sits above it.
floor = 0.3
queries = "queries.txt"
"""


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    with open(OUT / "reviews.csv", "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["review_id", "app_id", "text", "rating"])
        w.writerows(reviews())
    with open(OUT / "gold.csv", "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["sentence_id", "sentence", "aspect_term", "aspect_category", "sentiment"])
        for sid, sentence, aspects in GOLD:
            for term, cat, pol in aspects or [("", "", "")]:
                w.writerow([sid, sentence, term, cat, pol])
    sentences = {sid: s for sid, s, _ in GOLD}
    key = [
        {"sentence_id": sid, "sentence": sentences[sid], "aspects": [list(a) for a in aspects], "recommendations": recs}
        for sid, aspects, recs in ANSWER_KEY
    ]
    (OUT / "answer_key.json").write_text(json.dumps(key, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    (OUT / "queries.txt").write_text("\n".join(QUERIES) + "\n", encoding="utf-8")
    (OUT / "config.toml").write_text(CONFIG, encoding="utf-8")


if __name__ == "__main__":
    main()
