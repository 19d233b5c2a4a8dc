import sys

from bfburgers.cli_harness import main

sys.exit(main())
