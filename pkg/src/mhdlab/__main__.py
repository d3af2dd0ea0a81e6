import sys

from mhdlab.cli import main

sys.exit(main())
