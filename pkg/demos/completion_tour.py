"""Word completion walkthrough: what a slow typist sees per keystroke."""

from importlib import resources

from easyvoice.textaccel import load_dictionary

data = resources.files("easyvoice") / "data" / "sample_dict.tsv"
with data.open() as f:
    dictionary = load_dictionary(f)

print(f"dictionary: {len(dictionary)} words")
print()

# each keystroke narrows the candidate set; the best 8 are always shown
for prefix in ["", "t", "th", "tha", "than", "thank", "x"]:
    suggestions = dictionary.complete(prefix)
    shown = ", ".join(suggestions) if suggestions else "(none)"
    print(f"typed {prefix!r:8} -> {shown}")

print()
print("picking a suggestion saves the remaining keystrokes:")
word = dictionary.complete("th")[0]
print(f"  'th' + pick #1 = {word!r} ({len(word) - 2} keys saved)")
