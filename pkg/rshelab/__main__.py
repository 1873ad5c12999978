import sys

from rshelab.cli.main import main

sys.exit(main())
