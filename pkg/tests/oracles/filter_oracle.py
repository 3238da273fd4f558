"""Planted-composition CDX generator and a naive filter oracle.

Run as a script to regenerate ``tests/data/planted_1000.cdx`` and the frozen
survivor list ``tests/data/planted_1000.expected`` (one line number per
survivor). The generator labels every record with the reason it should be
dropped or kept; the oracle re-derives the survivors from the raw lines
with plain loops and must agree with the labels.
"""
import base64
import hashlib
import random
import sys
from datetime import datetime, timedelta
from pathlib import Path

DATA = Path(__file__).resolve().parent.parent / "data"

IMAGE_MIMES = ["image/jpeg", "image/png", "image/gif", "image/x-icon"]
SCRIPT_STYLE = ["text/css", "application/javascript", "text/javascript", "application/x-javascript"]
NONTEXT = ["application/pdf", "application/xml", "video/mp4", "application/octet-stream"]
BAD_EXT = ["jpg", "JPEG", "png", "gif", "bmp", "ico", "tif", "tiff", "css", "js", "swf"]
GOOD_PATHS = ["index.html", "a/b.htm", "page.php?id=3", "dir/", "", "doc.txt", "x.jpg.html"]


def digest_of(n):
    return base64.b32encode(hashlib.sha1(b"planted-%d" % n).digest()).decode()


def ts(rng):
    return "2009%02d%02d%02d%02d%02d" % (rng.randint(1, 12), rng.randint(1, 28),
                                         rng.randrange(24), rng.randrange(60), rng.randrange(60))


def shift(when, seconds):
    t = datetime.strptime(when, "%Y%m%d%H%M%S") + timedelta(seconds=seconds)
    return t.strftime("%Y%m%d%H%M%S")


def generate(n=1000, seed=20091104):
    """Returns (lines, labels); label 'keep' marks the planted survivors."""
    rng = random.Random(seed)
    rows = []  # dicts: key, ts, uri, mime, status, digest, label
    counter = [0]

    def fresh():
        counter[0] += 1
        return digest_of(counter[0])

    def row(label, mime="text/html", status="200", path=None, digest=None, when=None):
        host = "site%d.example.com" % rng.randrange(40)
        path = rng.choice(GOOD_PATHS) if path is None else path
        rows.append({"uri": "http://%s/%s" % (host, path), "key": "com,example,%s)/%s" % (
            host.split(".")[0], path), "ts": when or ts(rng), "mime": mime, "status": status,
            "digest": digest or fresh(), "label": label})
        return rows[-1]

    while len(rows) < n:
        kind = rng.choices(
            ["keep", "status", "image", "script", "nontext", "ext", "dup_later", "dup_earlier",
             "dup_of_filtered", "nodigest", "tie", "case"],
            [30, 10, 8, 6, 6, 6, 8, 4, 3, 3, 2, 2])[0]
        keeps = [r for r in rows if r["label"] == "keep" and r["digest"] != "-"]
        if kind == "keep":
            row("keep")
        elif kind == "status":
            row("drop:status", status=rng.choice(["301", "302", "404", "500", "206", "-"]))
        elif kind == "image":
            row("drop:mime", mime=rng.choice(IMAGE_MIMES))
        elif kind == "script":
            row("drop:mime", mime=rng.choice(SCRIPT_STYLE))
        elif kind == "nontext":
            row("drop:nontext", mime=rng.choice(NONTEXT))
        elif kind == "ext":
            row("drop:ext", path="img/p%d.%s" % (rng.randrange(999), rng.choice(BAD_EXT)))
        elif kind == "dup_later" and keeps:
            orig = rng.choice(keeps)
            row("drop:dup", digest=orig["digest"], when=shift(orig["ts"], 1))
        elif kind == "dup_earlier" and keeps:
            orig = rng.choice(keeps)
            row("keep", digest=orig["digest"], when=shift(orig["ts"], -1))
            orig["label"] = "drop:dup"
        elif kind == "dup_of_filtered":
            bad = row("drop:status", status="404")
            row("keep", digest=bad["digest"], when=shift(bad["ts"], 100))
        elif kind == "nodigest":
            row("keep", digest="-")
        elif kind == "tie" and keeps:
            orig = rng.choice(keeps)
            row("drop:dup", digest=orig["digest"], when=orig["ts"])  # same ts, later in input
        elif kind == "case":
            row("keep", mime=rng.choice(["Text/HTML", "TEXT/plain"]))
    rows = rows[:n]
    lines = [" CDX N b a m s k r M V g"]
    for i, r in enumerate(rows):
        lines.append("%s %s %s %s %s %s - - %d planted-%02d.warc.gz" % (
            r["key"], r["ts"], r["uri"], r["mime"], r["status"], r["digest"], 1000 * i, i % 7))
    return lines, [r["label"] for r in rows]


def oracle(lines):
    """Line numbers (1-based, header included) of records surviving the default chain."""
    stage = []
    for no, line in enumerate(lines, 1):
        if line.startswith(" CDX"):
            continue
        f = line.split(" ")
        uri, mime, status, digest = f[2], f[3].lower(), f[4], f[5]
        if status != "200":
            continue
        if mime.startswith("image/") or mime in ("text/css", "application/javascript",
                                                  "text/javascript", "application/x-javascript"):
            continue
        if not mime.startswith("text/"):
            continue
        path = uri.split("://", 1)[1]
        path = path[path.find("/"):] if "/" in path else ""
        path = path.split("?")[0].split("#")[0]
        last = path.rsplit("/", 1)[-1]
        ext = last.rsplit(".", 1)[1].lower() if "." in last.strip(".") else ""
        if ext in {"jpg", "jpeg", "png", "gif", "bmp", "ico", "tif", "tiff", "css", "js", "swf"}:
            continue
        stage.append((no, f[1], digest))
    best = {}
    for no, when, digest in stage:
        if digest == "-":
            continue
        if digest not in best or when < best[digest][1]:
            best[digest] = (no, when)
    winners = {no for no, _ in best.values()}
    return [no for no, _, digest in stage if digest == "-" or no in winners]


def main():
    lines, labels = generate()
    expected = oracle(lines)
    planted = [i + 2 for i, lab in enumerate(labels) if lab == "keep"]
    if planted != expected:
        diff = sorted(set(planted) ^ set(expected))
        sys.exit("planted labels and oracle disagree on lines %s" % diff[:10])
    DATA.mkdir(exist_ok=True)
    (DATA / "planted_1000.cdx").write_text("\n".join(lines) + "\n")
    (DATA / "planted_1000.expected").write_text("".join("%d\n" % n for n in expected))
    print("%d records, %d survivors" % (len(lines) - 1, len(expected)))


if __name__ == "__main__":
    main()
