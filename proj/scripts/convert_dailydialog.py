#!/usr/bin/env python3
"""Convert the DailyDialog release format to the conversation jsonl schema.

Expects the standard per-split files:
    dialogues_<split>.txt          one dialogue per line, utterances separated
                                   by __eou__
    dialogues_emotion_<split>.txt  space-separated digit labels per utterance

Usage:
    convert_dailydialog.py <text_file> <emotion_file> <out.jsonl>
"""

import json
import sys

LABELS = {
    "0": "no_emotion",
    "1": "anger",
    "2": "disgust",
    "3": "fear",
    "4": "happiness",
    "5": "sadness",
    "6": "surprise",
}


def main() -> int:
    if len(sys.argv) != 4:
        print(__doc__, file=sys.stderr)
        return 2
    text_path, emo_path, out_path = sys.argv[1:4]

    with open(text_path, encoding="utf-8") as f:
        dialogues = [line.rstrip("\n") for line in f if line.strip()]
    with open(emo_path, encoding="utf-8") as f:
        emotions = [line.split() for line in f if line.strip()]
    if len(dialogues) != len(emotions):
        print(f"line count mismatch: {len(dialogues)} dialogues vs {len(emotions)} label rows", file=sys.stderr)
        return 1

    written = 0
    with open(out_path, "w", encoding="utf-8") as out:
        for idx, (line, labels) in enumerate(zip(dialogues, emotions)):
            utterances = [u.strip() for u in line.split("__eou__") if u.strip()]
            if len(utterances) != len(labels):
                print(f"skipping dialogue {idx}: {len(utterances)} utterances vs {len(labels)} labels",
                      file=sys.stderr)
                continue
            messages = [
                {"speaker": "A" if i % 2 == 0 else "B", "text": text, "label": LABELS[label]}
                for i, (text, label) in enumerate(zip(utterances, labels))
            ]
            out.write(json.dumps({"id": f"dd-{idx}", "messages": messages}, ensure_ascii=False) + "\n")
            written += 1
    print(f"wrote {written} conversations to {out_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
