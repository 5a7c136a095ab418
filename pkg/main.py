import sys

from motionguide.interfaces.cli.cli import main

if __name__ == "__main__":
    sys.exit(main())
