# Writes the golden classification prompts from the fixtures with an implementation that
# shares no code with the C++ renderer. Output is committed; rerun only on purpose.
import json
import math
import pathlib
import re
import string

ROOT = pathlib.Path(__file__).resolve().parent.parent
FIX = ROOT / "fixtures"

SYSTEM = (
    "You are an expert assistant in the field of customer service. Your task is to help "
    "workers in the customer service department of a company. Your task is to classify the "
    "customer's question in order to help the customer service worker to answer the question.\n\n"
    "In order to help the worker, you MUST respond with the number and the name of one of the "
    "following classes you know. If you cannot answer the question, respond: \"-1 Unknown\".\n\n"
    "In case you reply with something else, you will be penalized.\n\n"
    "The classes are:\n"
)


def canon(s):
    s = re.sub(r"[\s\-_]+", "_", s.strip().lower())
    return s.strip(string.punctuation)


def load():
    labels = [canon(l) for l in (FIX / "banking77_labels.txt").read_text().splitlines() if l.strip()]
    ex = [json.loads(l) for l in (FIX / "banking77_exemplars_231.jsonl").read_text().splitlines()]
    for e in ex:
        e["label"] = canon(e["label"])
    return labels, ex


def classes_block(labels):
    return "\n".join(f"{i} {n}" for i, n in enumerate(labels))


def serialize(messages):
    out = ""
    for role, content in messages:
        out += f"### {role}\n{content}\n"
    return out


def tokens(messages):
    return math.ceil(sum(len(c) for _, c in messages) / 4.0)


def generation_prompt(labels, ex, members, n):
    system = ("You are a data generation assistant. You write realistic customer questions for a banking "
              "customer-service intent classifier.")
    single = len(members) == 1
    user = ("Here is an intent class with example customer questions:\n" if single
            else "The following intent classes are easily confused with each other:\n")
    for m in members:
        user += f"\nClass: {labels[m]}\nExamples:\n"
        seeds = [e["text"] for e in ex if e["label"] == labels[m]][:3]
        user += "".join(f"- {s}\n" for s in seeds)
    where = "this class" if single else "each class above"
    user += f"\nGenerate {n} new customer questions for {where} ({n * len(members)} lines in total)."
    if not single:
        user += (" Pay close attention to what distinguishes these confusable classes: every question "
                 "must clearly belong to its own class and not to any other class listed here.")
    user += (" Do not repeat the examples.\n\n"
             "Output one example per line as <class name><TAB><question>, using the class names "
             "exactly as written above, with no numbering and no other text.")
    return [("system", system), ("user", user)]


def main():
    labels, ex = load()
    query = "I just got my card, how do I turn it on?"

    block = "\n\nHere are some examples of questions and their classes:\n"
    block += "\n".join(f"{e['text']} {e['label']}" for e in ex)
    system_msgs = [("system", SYSTEM + classes_block(labels) + block), ("user", query)]
    (ROOT / "golden" / "prompt_system_231.txt").write_text(serialize(system_msgs), encoding="utf-8")

    picked = [ex[0], ex[3]]
    hist = [("system", SYSTEM + classes_block(labels))]
    for e in picked:
        hist.append(("user", e["text"]))
        hist.append(("assistant", f"{labels.index(e['label'])} {e['label']}"))
    hist.append(("user", query))
    (ROOT / "golden" / "prompt_history_2.txt").write_text(serialize(hist), encoding="utf-8")

    pair = sorted([labels.index("top_up_failed"), labels.index("top_up_reverted")])
    (ROOT / "golden" / "generation_top_up.txt").write_text(
        serialize(generation_prompt(labels, ex, pair, 20)), encoding="utf-8")

    meta = {"system_231_tokens": tokens(system_msgs), "history_2_tokens": tokens(hist)}
    (ROOT / "golden" / "prompt_tokens.json").write_text(json.dumps(meta, indent=2) + "\n")


if __name__ == "__main__":
    main()
