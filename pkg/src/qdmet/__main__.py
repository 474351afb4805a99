import sys

from qdmet.cli import main

sys.exit(main())
