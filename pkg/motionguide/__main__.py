import sys

from motionguide.interfaces.cli.cli import main

sys.exit(main())
