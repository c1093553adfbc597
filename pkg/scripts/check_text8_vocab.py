import argparse
import logging
import os
import sys

# Add parent directory to sys.path to access embedding_forge
sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from embedding_forge.corpus import build_vocabulary

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

PUBLISHED_SIZE = 63643


def check_cutoffs(corpus_path: str, cutoffs):
    # one counting pass at the lowest cutoff, then filter
    vocabulary = build_vocabulary(corpus_path, min(cutoffs))
    matches = []
    for cutoff in cutoffs:
        size = int((vocabulary.counts >= cutoff).sum())
        marker = "  <- matches" if size == PUBLISHED_SIZE else ""
        print(f"count >= {cutoff}: {size} words{marker}")
        if size == PUBLISHED_SIZE:
            matches.append(cutoff)
    return matches


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description="Report the text8 vocabulary size under different cutoffs.")
    parser.add_argument("corpus", help="Path to text8")
    parser.add_argument("--cutoffs", type=int, nargs="+", default=[5, 6])
    args = parser.parse_args()

    matches = check_cutoffs(args.corpus, args.cutoffs)
    if not matches:
        print(f"No cutoff reproduces {PUBLISHED_SIZE} words")
        sys.exit(1)
