import sys

from lfgen.cli import main

sys.exit(main())
