import sys

from unfitted.cli import main

sys.exit(main())
