import sys

from phgcl.cli import main

sys.exit(main())
