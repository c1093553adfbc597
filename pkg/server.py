
import sys
import os

# Add the current directory to sys.path so we can import the package
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from embedding_forge.__main__ import main

if __name__ == "__main__":
    sys.exit(main(sys.argv[1:] or ["serve"]))
