import sys

from driftspec.cli import main

sys.exit(main())
