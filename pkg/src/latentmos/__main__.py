import sys

from latentmos.cli import main

sys.exit(main())
