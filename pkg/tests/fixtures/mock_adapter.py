"""
Toy classifier speaking the adapter line protocol

Reads image paths on stdin, prints `path<TAB>l1,l2,l3,l4,l5`. The top label is
the red value of pixel (0, 0) // 10, so an image filled with 10 * label is
classified correctly until something moves its top-left pixel.

    python mock_adapter.py [normal|constant|fail-on-flip]
"""
import sys

from PIL import Image


def ranked_labels(path: str) -> list:
    with Image.open(path) as image:
        red = image.convert("RGB").getpixel((0, 0))[0]
    top = red // 10
    return [str(top + 100 * k) for k in range(5)]


def main(mode: str) -> int:
    for line in sys.stdin:
        path = line.strip()
        if not path:
            continue
        if mode == "constant":
            labels = ["cat", "dog", "car", "tree", "boat"]
        else:
            labels = ranked_labels(path)
            if mode == "fail-on-flip" and labels[0] == "25":
                print(f"cannot classify {path}", file=sys.stderr)
                return 1
        print(f"{path}\t{','.join(labels)}")
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1] if len(sys.argv) > 1 else "normal"))
