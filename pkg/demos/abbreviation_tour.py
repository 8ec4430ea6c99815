"""Abbreviations expand when a message is spoken, not while typing,
so the text panel always shows exactly what was typed."""

from easyvoice.textaccel import AbbreviationTable

table = AbbreviationTable((
    ("btw", "by the way"),
    ("omw", "on my way"),
    ("dr", "doctor"),
))

for text in [
    "btw I am omw",
    "the dr said btw",
    "BTW capitals still match",
    "nothing to expand here",
    "subtwo words: btws stays put",  # only whole tokens expand
]:
    print(f"{text!r}")
    print(f"  speaks as {table.expand(text)!r}")

# definitions can be added live from the UI; newest wins
table = table.define("dr", "doctor Smith")
print()
print(f"after redefining dr: {table.expand('seeing the dr')!r}")

# expansions are never re-scanned, so self-referring entries cannot loop
table = table.define("x", "x and x again")
print(f"self reference is safe: {table.expand('x')!r}")
