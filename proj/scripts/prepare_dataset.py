#!/usr/bin/env python3
"""Converts an action dataset into PGM frame directories plus a stsnn manifest.

Expected source layouts:
  kth         person01_boxing_d1_uncomp.avi, ... (any directory depth)
  weizmann    daria_bend.avi, lena_run1.avi, ...
  ixmas       <class>/<actor>_<anything>.avi
  ucf-sports  <class>/<clip>/ holding either one video or numbered image frames
Requires ffmpeg on PATH.
"""

import argparse
import re
import shutil
import subprocess
import sys
from pathlib import Path

VIDEO_EXT = {".avi", ".mp4", ".mpg", ".mpeg", ".mov", ".vob"}
IMAGE_EXT = {".jpg", ".jpeg", ".png", ".bmp", ".pgm", ".ppm"}
PROTOCOL = {
    "kth": "fixed-subject-split",
    "weizmann": "leave-one-subject-out",
    "ixmas": "leave-one-subject-out",
    "ucf-sports": "class-thirds",
}


def videos(root):
    return sorted(p for p in root.rglob("*") if p.suffix.lower() in VIDEO_EXT)


def kth_entries(src):
    for v in videos(src):
        m = re.match(r"person(\d+)_([a-z]+)_(d\d)", v.stem)
        if m:
            yield f"p{m[1]}_{m[2]}_{m[3]}", m[1], m[2], v


def weizmann_entries(src):
    for v in videos(src):
        m = re.match(r"([a-z]+)_([a-z]+\d?)$", v.stem, re.IGNORECASE)
        if m:
            # wave1/wave2 are distinct actions; lena's run1/run2 etc. are repeated takes
            cls = re.sub(r"^(run|walk|skip)\d$", r"\1", m[2].lower())
            yield v.stem, m[1].lower(), cls, v


def ixmas_entries(src):
    for v in videos(src):
        cls = v.parent.name
        yield f"{cls}_{v.stem}", v.stem.split("_")[0], cls, v


def ucf_entries(src):
    for cls_dir in sorted(p for p in src.iterdir() if p.is_dir()):
        for clip in sorted(p for p in cls_dir.iterdir() if p.is_dir()):
            vids = videos(clip)
            source = vids[0] if vids else clip
            yield f"{cls_dir.name}_{clip.name}", "", cls_dir.name, source


ENTRIES = {"kth": kth_entries, "weizmann": weizmann_entries, "ixmas": ixmas_entries, "ucf-sports": ucf_entries}


def extract_frames(source, out_dir, color):
    out_dir.mkdir(parents=True, exist_ok=True)
    ext, fmt = ("ppm", "rgb24") if color else ("pgm", "gray")
    if source.is_dir():
        frames = sorted(p for p in source.iterdir() if p.suffix.lower() in IMAGE_EXT)
        for i, f in enumerate(frames):
            run_ffmpeg(["-i", str(f), "-pix_fmt", fmt, str(out_dir / f"frame_{i:05d}.{ext}")])
    else:
        run_ffmpeg(["-i", str(source), "-pix_fmt", fmt, str(out_dir / f"frame_%05d.{ext}")])


def run_ffmpeg(args):
    subprocess.run(["ffmpeg", "-loglevel", "error", "-y", *args], check=True)


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--dataset", required=True, choices=sorted(ENTRIES))
    ap.add_argument("--src", required=True, type=Path, help="extracted dataset archive")
    ap.add_argument("--out", required=True, type=Path, help="output directory (frames/ and manifest.tsv)")
    ap.add_argument("--color", action="store_true", help="keep RGB frames (converted to luma on load)")
    args = ap.parse_args()
    if shutil.which("ffmpeg") is None:
        sys.exit("ffmpeg not found on PATH")

    rows = list(ENTRIES[args.dataset](args.src))
    if not rows:
        sys.exit(f"no {args.dataset} samples found under {args.src}")
    classes = sorted({r[2] for r in rows})
    lines = [f"# protocol = {PROTOCOL[args.dataset]}", f"# classes = {','.join(classes)}"]
    for clip_id, subject, cls, source in rows:
        rel = Path("frames") / clip_id
        if not (args.out / rel).is_dir():
            extract_frames(source, args.out / rel, args.color)
        lines.append(f"{clip_id}\t{subject}\t{cls}\t{rel.as_posix()}")
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "manifest.tsv").write_text("\n".join(lines) + "\n")
    print(f"{len(rows)} samples, {len(classes)} classes -> {args.out / 'manifest.tsv'}")


if __name__ == "__main__":
    main()
