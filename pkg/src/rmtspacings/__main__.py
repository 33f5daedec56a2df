import sys

from rmtspacings.cli import main

sys.exit(main())
