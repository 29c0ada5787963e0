"""Command line front end.

    t2av-extract audio --clips clips.json --encoder logmel --out a.emb
    t2av-extract video --clips clips.json --encoder framestats --out v.emb
    t2av-extract text  --clips clips.json --encoder hashvec --out t.emb
    t2av-extract pairs --clips clips.json --audio a.emb --video v.emb \
                       --text t.emb --out pairs.json

clips.json is a list of clip objects (see clips.py).  The text command
encodes each clip's class_tag.  pairs writes the manifest tying clips
to their rows in three already-extracted files.  Exit codes: 0 on
success, 1 for usage problems, 2 when input data cannot be processed.
"""

import argparse
import sys

from . import extract
from .clips import load_clips
from .errors import ExtractError


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.exit(1, f"{self.prog}: error: {message}\n")

    def __init__(self, *args, **kwargs):
        # no prefix matching; abbreviations break when flags are added
        kwargs.setdefault("allow_abbrev", False)
        super().__init__(*args, **kwargs)


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


_DEFAULT_ENCODERS = {"audio": "logmel", "video": "framestats",
                     "text": "hashvec"}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="t2av-extract",
                     description="emit embedding files from media clips")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, default in _DEFAULT_ENCODERS.items():
        p = sub.add_parser(name, help=f"extract {name} embeddings")
        p.add_argument("--clips", required=True,
                       help="JSON list of clip objects")
        p.add_argument("--encoder", default=default,
                       help=f"encoder id (default {default})")
        p.add_argument("--out", required=True, help="output embedding file")
        if name != "text":
            p.add_argument("--threads", type=_positive, default=None,
                           help="max parallel clip decodes")
    p = sub.add_parser("pairs", help="write a pair manifest for three files")
    p.add_argument("--clips", required=True)
    p.add_argument("--audio", required=True)
    p.add_argument("--video", required=True)
    p.add_argument("--text", required=True)
    p.add_argument("--out", required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        clips = load_clips(args.clips)
        if args.command == "audio":
            count, dim = extract.extract_audio(clips, args.encoder, args.out,
                                               args.threads)
        elif args.command == "video":
            count, dim = extract.extract_video(clips, args.encoder, args.out,
                                               args.threads)
        elif args.command == "text":
            tags = [c.class_tag for c in clips]
            count, dim = extract.extract_text(tags, args.encoder, args.out)
        else:
            n = extract.build_pair_manifest(clips, args.audio, args.video,
                                            args.text, args.out)
            print(f"wrote {args.out}: {n} pairs", file=sys.stderr)
            return 0
        print(f"wrote {args.out}: {count} rows of dim {dim}", file=sys.stderr)
    except ExtractError as e:
        print(f"t2av-extract: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
