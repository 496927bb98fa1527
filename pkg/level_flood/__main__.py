import sys

from level_flood.main import main

sys.exit(main())
