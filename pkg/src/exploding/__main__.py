import sys

from exploding.cli import main

sys.exit(main())
