import sys

from dgshock.cli import main

sys.exit(main())
