import sys

from rbqkd.cli import main

sys.exit(main())
