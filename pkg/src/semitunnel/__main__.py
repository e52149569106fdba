import sys

from semitunnel.cli import main

sys.exit(main())
