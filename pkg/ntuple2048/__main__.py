import sys

from ntuple2048.cli import main

if __name__ == "__main__":
    sys.exit(main())
