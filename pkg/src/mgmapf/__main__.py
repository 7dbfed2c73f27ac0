import sys

from mgmapf.cli import main

sys.exit(main())
