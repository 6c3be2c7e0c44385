import sys

from acm.harness.cli import main

sys.exit(main())
